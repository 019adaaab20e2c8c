"""Charging infrastructure design models: deterministic, budgeted robust and
distributionally robust chance-constrained.

Every model shares the placement variables ``x_<stop>_<SS|FF>``, one capacity
variable ``z_<line>`` per line and the cost objective. Energy constraints are
written per line prefix: for visit ``s`` (1-based, after the terminal) the
prefix covers segments ``1..s``.

* no-overcharge: charge received at visits ``1..s`` does not exceed the
  consumption of the prefix;
* min-level: ``(soc_upper - soc_lower) * z`` plus the charge received at visits
  ``1..s-1`` covers the consumption of the prefix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .datagen import EnergySampleSet
from .milp.model import (
    MilpError,
    MilpModel,
    Sense,
    SolveResult,
    SolveStatus,
    VarKind,
    VarRole,
)
from .network import (
    CHARGER_TYPES,
    ChargerType,
    ChargingDesign,
    LineSpec,
    NetworkInstance,
    candidate_stops,
    design_costs,
    validate_network,
)

DEFAULT_EPSILON = 0.1
DEFAULT_BIG_M = 25.0
OBJECTIVE_RTOL = 1e-5


class GammaPolicy(str, Enum):
    CONSTANT = "constant"  # same budget on every prefix
    LINEAR = "linear"  # budget grows with the prefix length


@dataclass(frozen=True)
class BoUConfig:
    """Budget of uncertainty settings.

    ``shared_duals`` uses one ``u`` per line and one ``v`` per segment for all
    prefixes. The default gives every prefix its own dual variables, which
    makes each min-level row exactly the worst case over the budget.
    """

    gamma: float
    policy: GammaPolicy = GammaPolicy.CONSTANT
    shared_duals: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def budget(self, prefix_len: int) -> float:
        if self.policy is GammaPolicy.LINEAR:
            return self.gamma * prefix_len
        return self.gamma


@dataclass(frozen=True)
class DrccConfig:
    theta: float
    samples: EnergySampleSet
    epsilon: float = DEFAULT_EPSILON
    big_m: float = DEFAULT_BIG_M

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.big_m <= 0:
            raise ValueError("big_m must be > 0")

    @property
    def violation_budget(self) -> int:
        """Samples allowed to violate a line's constraints: floor(eps * N)."""
        return int(math.floor(self.epsilon * self.samples.n + 1e-9))


def worst_case_prefix_deviation(devs, budget: float) -> float:
    """Largest total deviation when at most ``budget`` whole segments deviate.

    Continuous knapsack with unit weights, solved greedily: take the largest
    deviations first, the last one fractionally.
    """
    if budget <= 0:
        return 0.0
    total = 0.0
    left = float(budget)
    for d in sorted((float(d) for d in devs), reverse=True):
        take = min(1.0, left)
        total += take * d
        left -= take
        if left <= 0:
            break
    return total


# --------------------------------------------------------------------------
# shared skeleton
# --------------------------------------------------------------------------

def _check(inst: NetworkInstance) -> None:
    problems = validate_network(inst)
    if problems:
        raise ValueError("invalid network: " + "; ".join(problems))


def capacity_upper_bound(inst: NetworkInstance, line: LineSpec,
                         samples: Optional[EnergySampleSet] = None) -> float:
    """Upper bound on a line's capacity that never cuts off an optimum."""
    worst = float(line.segment_maxima().sum())
    if samples is not None:
        worst = max(worst, float(samples.samples[line.id].sum(axis=1).max()))
    return 2.0 * worst / inst.costs.usable_fraction


def _skeleton(inst: NetworkInstance, name: str,
              samples: Optional[EnergySampleSet] = None) -> MilpModel:
    m = MilpModel(name=name)
    costs = inst.costs
    xvars: dict[tuple[int, ChargerType], int] = {}
    cands = candidate_stops(inst)
    for stop in cands:
        for t in CHARGER_TYPES:
            xvars[(stop, t)] = m.add_var(f"x_{stop}_{t.value}", VarRole.PLACEMENT, VarKind.BINARY)
    zvars = {}
    for line in inst.lines:
        zvars[line.id] = m.add_var(
            f"z_{line.id}", VarRole.CAPACITY, VarKind.CONTINUOUS,
            0.0, capacity_upper_bound(inst, line, samples),
        )
    obj = [(xvars[(s, t)], costs.station_cost[t]) for s in cands for t in CHARGER_TYPES]
    obj += [(zvars[l.id], costs.battery_cost_per_kwh * l.fleet_size) for l in inst.lines]
    m.set_objective(obj)
    for stop in cands:
        m.add_constr(((xvars[(stop, t)], 1.0) for t in CHARGER_TYPES), Sense.LE, 1.0,
                     f"onetype_{stop}")
    m.index = {"x": xvars, "z": zvars}
    return m


def _charge_terms(m: MilpModel, inst: NetworkInstance, line: LineSpec, upto: int):
    """Linear charge received at visits 1..upto as (var, kWh) terms."""
    xvars = m.index["x"]
    terms = []
    for v in line.visits[1:upto + 1]:
        for t in CHARGER_TYPES:
            var = xvars.get((v.stop, t))
            if var is not None:
                terms.append((var, inst.costs.charge_kwh(t, v.dwell_s)))
    return terms


def _neg(terms):
    return [(v, -c) for v, c in terms]


def _add_no_overcharge(m, inst, line, prefix):
    for s in range(1, len(line.visits)):
        m.add_constr(_charge_terms(m, inst, line, s), Sense.LE, prefix[s],
                     f"over_{line.id}_{s}")


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def build_cid(inst: NetworkInstance) -> MilpModel:
    _check(inst)
    m = _skeleton(inst, "cid")
    usable = inst.costs.usable_fraction
    for line in inst.lines:
        prefix = np.concatenate([[0.0], np.cumsum(line.segment_means())])
        _add_no_overcharge(m, inst, line, prefix)
        z = m.index["z"][line.id]
        for s in range(1, len(line.visits)):
            row = [(z, usable)] + _charge_terms(m, inst, line, s - 1)
            m.add_constr(row, Sense.GE, prefix[s], f"level_{line.id}_{s}")
    return m


def build_bou(inst: NetworkInstance, cfg: BoUConfig) -> MilpModel:
    """Robust model with the budgeted deviation set dualised into the rows.

    For a prefix with budget G the worst extra consumption is
    ``min G*u + sum v_i  s.t.  u + v_i >= dev_i, u, v >= 0``, so the min-level
    row gains ``- G*u - sum v_i`` on its left-hand side.
    """
    _check(inst)
    m = _skeleton(inst, "bou")
    usable = inst.costs.usable_fraction
    m.index["u"], m.index["v"] = {}, {}
    for line in inst.lines:
        k = line.id
        devs = line.segment_devs()
        prefix = np.concatenate([[0.0], np.cumsum(line.segment_means())])
        _add_no_overcharge(m, inst, line, prefix)
        z = m.index["z"][k]
        dmax = float(devs.max(initial=0.0))
        shared_u = shared_v = None
        if cfg.shared_duals:
            shared_u = m.add_var(f"u_{k}", VarRole.DUAL_U, VarKind.CONTINUOUS, 0.0, dmax)
            shared_v = {}
            for i, d in enumerate(devs, start=1):
                if d > 0:
                    shared_v[i] = m.add_var(f"v_{k}_{i}", VarRole.DUAL_V,
                                            VarKind.CONTINUOUS, 0.0, float(d))
                    m.add_constr([(shared_u, 1.0), (shared_v[i], 1.0)], Sense.GE,
                                 float(d), f"dual_{k}_{i}")
        for s in range(1, len(line.visits)):
            gamma = cfg.budget(s)
            if cfg.shared_duals:
                u, v = shared_u, {i: var for i, var in shared_v.items() if i <= s}
            else:
                u = m.add_var(f"u_{k}_{s}", VarRole.DUAL_U, VarKind.CONTINUOUS, 0.0,
                              float(devs[:s].max(initial=0.0)))
                v = {}
                for i in range(1, s + 1):
                    d = float(devs[i - 1])
                    if d > 0:
                        v[i] = m.add_var(f"v_{k}_{s}_{i}", VarRole.DUAL_V,
                                         VarKind.CONTINUOUS, 0.0, d)
                        m.add_constr([(u, 1.0), (v[i], 1.0)], Sense.GE, d,
                                     f"dual_{k}_{s}_{i}")
            m.index["u"][(k, s)] = u
            m.index["v"][(k, s)] = dict(v)
            row = [(z, usable)] + _charge_terms(m, inst, line, s - 1)
            row.append((u, -gamma))
            row += [(var, -1.0) for var in v.values()]
            m.add_constr(row, Sense.GE, prefix[s], f"level_{k}_{s}")
    return m


def required_big_m(inst: NetworkInstance, samples: EnergySampleSet) -> float:
    """Smallest constant that keeps the violation-flag rows exact.

    A flagged sample must be able to relax both energy rows; that needs the
    constant to cover the largest sample prefix sum and the largest charge
    a line can receive.
    """
    need = 0.0
    for line in inst.lines:
        need = max(need, float(samples.prefix_sums(line.id).max()))
        full = sum(
            max(inst.costs.charge_kwh(t, v.dwell_s) for t in CHARGER_TYPES)
            for v in line.visits[1:] if v.stop not in inst.excluded_stops
        )
        need = max(need, full)
    return need


def _check_samples(inst: NetworkInstance, samples: EnergySampleSet) -> None:
    for line in inst.lines:
        if line.id not in samples.samples:
            raise ValueError(f"samples lack line {line.id}")
        arr = samples.samples[line.id]
        if arr.shape != (samples.n, line.n_segments):
            raise ValueError(
                f"line {line.id}: samples have shape {arr.shape}, "
                f"expected ({samples.n}, {line.n_segments})"
            )
        if np.any(arr < 0):
            raise ValueError(f"line {line.id}: negative sample values")


def build_drcc(inst: NetworkInstance, cfg: DrccConfig) -> MilpModel:
    """Wasserstein chance-constrained model with big-M violation flags.

    Per line: one ``q``, continuous ``r_<line>_<j>_<i>`` and binary
    ``y_<line>_<j>_<i>`` for sample ``j`` and visit ``i``. The row
    ``sum_j sum_i y <= floor(eps * N)`` is always added; it is implied by the
    budget rows when theta > 0 and gives the plain sample-average meaning at
    theta = 0.
    """
    _check(inst)
    samples = cfg.samples
    _check_samples(inst, samples)
    need = required_big_m(inst, samples)
    if cfg.big_m < need - 1e-9:
        warnings.warn(
            f"big_m={cfg.big_m:g} may be too small for this instance; "
            f"use at least {need:.6g}",
            RuntimeWarning,
            stacklevel=2,
        )
    big_m = cfg.big_m
    n = samples.n
    m = _skeleton(inst, "drcc", samples)
    usable = inst.costs.usable_fraction
    m.index.update(q={}, r={}, y={})
    for line in inst.lines:
        k = line.id
        nvis = len(line.visits)
        paths = samples.prefix_sums(k)
        z = m.index["z"][k]
        q = m.add_var(f"q_{k}", VarRole.DIST_Q, VarKind.CONTINUOUS, 0.0, big_m)
        m.index["q"][k] = q
        r, y = {}, {}
        for j in range(n):
            for i in range(1, nvis):
                r[(j, i)] = m.add_var(f"r_{k}_{j}_{i}", VarRole.DIST_R,
                                      VarKind.CONTINUOUS, 0.0, big_m)
        for j in range(n):
            for i in range(1, nvis):
                y[(j, i)] = m.add_var(f"y_{k}_{j}_{i}", VarRole.VIOLATION, VarKind.BINARY)
        m.index["r"][k], m.index["y"][k] = r, y
        for s in range(1, nvis):
            row = [(q, cfg.epsilon * n)]
            row += [(r[(j, i)], -1.0) for j in range(n) for i in range(1, s + 1)]
            m.add_constr(row, Sense.GE, cfg.theta * n, f"eps_{k}_{s}")
            charge_s = _charge_terms(m, inst, line, s)
            charge_prev = _charge_terms(m, inst, line, s - 1)
            for j in range(n):
                flags = [(y[(j, i)], big_m) for i in range(1, s + 1)]
                moved = [(r[(j, i)], 1.0) for i in range(1, s + 1)]
                load = float(paths[j, s])
                # q - sum r <= M (1 - sum y)
                m.add_constr([(q, 1.0)] + _neg(moved) + flags, Sense.LE, big_m,
                             f"flag_{k}_{s}_{j}")
                # sample prefix - charge + M sum y >= q - sum r
                m.add_constr(_neg(charge_s) + [(q, -1.0)] + moved + flags, Sense.GE,
                             -load, f"dover_{k}_{s}_{j}")
                # usable z + earlier charge - sample prefix + M sum y >= q - sum r
                m.add_constr([(z, usable)] + charge_prev + [(q, -1.0)] + moved + flags,
                             Sense.GE, load, f"dlevel_{k}_{s}_{j}")
        m.add_constr([(var, 1.0) for var in y.values()], Sense.LE,
                     float(cfg.violation_budget), f"card_{k}")
    return m


# --------------------------------------------------------------------------
# solutions
# --------------------------------------------------------------------------

def extract_design(inst: NetworkInstance, model: MilpModel, result: SolveResult) -> ChargingDesign:
    """Turn a solver result into a priced design.

    Binaries are rounded at 0.5 and the objective is recomputed from the
    rounded placement and the raw capacities.
    """
    if result.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        raise MilpError(f"no design: solver status {result.status.value}")
    if result.values is None:
        raise MilpError(f"no design: solver status {result.status.value} without a solution")
    x = result.values
    placement = {}
    for (stop, t), var in model.index["x"].items():
        if x[var] > 0.5:
            placement[stop] = t
    capacity = {k: max(0.0, float(x[var])) for k, var in model.index["z"].items()}
    design = design_costs(inst, placement, capacity)
    solver_obj = result.objective
    if math.isfinite(solver_obj):
        diff = abs(design.objective_eur - solver_obj)
        if diff > OBJECTIVE_RTOL * max(1.0, abs(solver_obj)):
            raise MilpError(
                f"recomputed objective {design.objective_eur:.6f} differs from "
                f"solver objective {solver_obj:.6f}"
            )
    return design
