"""Brute-force reference solutions built from the model definitions.

Nothing here touches the MILP layer. For a fixed placement the capacity of
each line is either closed form (mean and robust models) or found by
bisection on the sample-distance test (chance-constrained model), and the
cheapest placement wins.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, Mapping, Optional, Union

import numpy as np

from .datagen import EnergySampleSet
from .models import BoUConfig, DrccConfig, capacity_upper_bound, worst_case_prefix_deviation
from .network import (
    CHARGER_TYPES,
    LEVEL_TOL,
    ChargerType,
    ChargingDesign,
    LineSpec,
    NetworkInstance,
    candidate_stops,
    design_costs,
    visit_charge_kwh,
)

MAX_CANDIDATES = 8
MAX_CANDIDATES_DRCC = 6
MAX_SAMPLES_DRCC = 20
BISECTION_TOL = 1e-6

Placement = Mapping[int, ChargerType]


class OracleTooLarge(ValueError):
    pass


def enumerate_placements(candidates) -> Iterator[dict[int, ChargerType]]:
    """Every map stop -> {none, SS, FF} in lexicographic order (none first)."""
    options = (None,) + CHARGER_TYPES
    for combo in itertools.product(options, repeat=len(candidates)):
        yield {s: t for s, t in zip(candidates, combo) if t is not None}


def _placement_key(placement: Placement, candidates) -> tuple:
    code = {None: 0, ChargerType.STANDARD: 1, ChargerType.FAST_FEEDING: 2}
    return (len(placement),) + tuple(code[placement.get(s)] for s in candidates)


def _line_capacity(inst: NetworkInstance, line: LineSpec, placement: Placement,
                   bou: Optional[BoUConfig]) -> Optional[float]:
    means = line.segment_means()
    prefix = np.concatenate([[0.0], np.cumsum(means)])
    charge = np.cumsum(visit_charge_kwh(line, placement, inst.costs))
    devs = line.segment_devs()
    need = 0.0
    for s in range(1, len(line.visits)):
        if charge[s] > prefix[s] + LEVEL_TOL:
            return None  # would overcharge at the mean
        load = prefix[s]
        if bou is not None:
            load += worst_case_prefix_deviation(devs[:s], bou.budget(s))
        need = max(need, load - charge[s - 1])
    return need / inst.costs.usable_fraction


def min_capacity_given_placement(
    inst: NetworkInstance,
    placement: Placement,
    mode: Union[str, BoUConfig] = "mean",
) -> dict[int, Optional[float]]:
    """Smallest capacity per line; ``None`` marks a line the placement overcharges."""
    bou = mode if isinstance(mode, BoUConfig) else None
    if bou is None and mode != "mean":
        raise ValueError(f"unknown mode {mode!r}")
    return {line.id: _line_capacity(inst, line, placement, bou) for line in inst.lines}


# --------------------------------------------------------------------------
# chance-constrained definition
# --------------------------------------------------------------------------

def sample_distances(line: LineSpec, placement: Placement, z: float,
                     paths: np.ndarray, costs) -> np.ndarray:
    """Distance of each sample path to the unsafe set, per prefix.

    Column ``s-1`` holds ``max(0, min over prefixes i <= s of the smaller of
    the no-overcharge and min-level slacks)``; a negative slack before
    clamping means the sample violates the constraints.
    """
    charge = np.cumsum(visit_charge_kwh(line, placement, costs))
    usable = costs.usable_fraction * z
    slack = []
    for s in range(1, len(line.visits)):
        over = paths[:, s] - charge[s]
        level = usable + charge[s - 1] - paths[:, s]
        slack.append(np.minimum(over, level))
    raw = np.minimum.accumulate(np.stack(slack, axis=1), axis=1)
    return raw


def _smallest_sum(values: np.ndarray, count: float) -> float:
    """Sum of the ``count`` smallest values; a fractional count weights the next one."""
    v = np.sort(values)
    whole = int(math.floor(count + 1e-12))
    total = float(v[:whole].sum())
    frac = count - whole
    if frac > 1e-12 and whole < v.size:
        total += frac * float(v[whole])
    return total


def drcc_feasible(
    inst: NetworkInstance,
    placement: Placement,
    z: Mapping[int, float],
    samples: EnergySampleSet,
    theta: float,
    epsilon: float,
    lines=None,
) -> bool:
    """Direct test of the Wasserstein chance constraint for a design.

    With theta > 0, every prefix needs the ``eps*N`` samples closest to the
    unsafe set to sit at total distance at least ``theta*N``. When ``eps*N``
    is fractional the partial sample is weighted, which is what the
    reformulated constraint enforces. With theta = 0 the test is empirical:
    at most ``floor(eps*N)`` sample paths may violate.
    """
    n = samples.n
    budget = epsilon * n
    tol = 1e-9
    for line in inst.lines if lines is None else lines:
        paths = samples.prefix_sums(line.id)
        raw = sample_distances(line, placement, z[line.id], paths, inst.costs)
        if theta <= 0:
            violated = int(np.count_nonzero(raw.min(axis=1) < -LEVEL_TOL))
            if violated > math.floor(budget + 1e-9):
                return False
            continue
        dist = np.maximum(raw, 0.0)
        for col in range(dist.shape[1]):
            if _smallest_sum(dist[:, col], budget) < theta * n - tol * max(1.0, theta * n):
                return False
    return True


def _drcc_line_capacity(inst, line, placement, samples, theta, epsilon) -> Optional[float]:
    hi = capacity_upper_bound(inst, line, samples)

    def ok(zval):
        return drcc_feasible(inst, placement, {line.id: zval}, samples, theta, epsilon,
                             lines=[line])

    if not ok(hi):
        return None
    if ok(0.0):
        return 0.0
    lo = 0.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# exhaustive search
# --------------------------------------------------------------------------

def _search(inst: NetworkInstance, capacity_fn, limit: int) -> Optional[ChargingDesign]:
    cands = candidate_stops(inst)
    if len(cands) > limit:
        raise OracleTooLarge(f"{len(cands)} candidate stops exceed the oracle limit of {limit}")
    best, best_key = None, None
    for placement in enumerate_placements(cands):
        caps = capacity_fn(placement)
        if caps is None or any(v is None for v in caps.values()):
            continue
        design = design_costs(inst, placement, caps)
        key = _placement_key(placement, cands)
        if best is None:
            best, best_key = design, key
            continue
        tol = 1e-9 * max(1.0, abs(best.objective_eur))
        if design.objective_eur < best.objective_eur - tol or (
            abs(design.objective_eur - best.objective_eur) <= tol and key < best_key
        ):
            best, best_key = design, key
    return best


def enumerate_optimal_cid(inst: NetworkInstance) -> Optional[ChargingDesign]:
    return _search(inst, lambda p: min_capacity_given_placement(inst, p), MAX_CANDIDATES)


def enumerate_optimal_bou(inst: NetworkInstance, cfg: BoUConfig) -> Optional[ChargingDesign]:
    return _search(inst, lambda p: min_capacity_given_placement(inst, p, cfg), MAX_CANDIDATES)


def enumerate_optimal_drcc(inst: NetworkInstance, cfg: DrccConfig) -> Optional[ChargingDesign]:
    if cfg.samples.n > MAX_SAMPLES_DRCC:
        raise OracleTooLarge(f"N={cfg.samples.n} exceeds the oracle limit of {MAX_SAMPLES_DRCC}")

    def caps(placement):
        out = {}
        for line in inst.lines:
            z = _drcc_line_capacity(inst, line, placement, cfg.samples, cfg.theta, cfg.epsilon)
            if z is None:
                return None
            out[line.id] = z
        return out

    return _search(inst, caps, MAX_CANDIDATES_DRCC)
