"""Monte Carlo trip feasibility and battery lifetime of a charging design."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datagen import DistSpec
from .network import (
    LEVEL_TOL,
    ChargerType,
    ChargingDesign,
    CostParams,
    LineSpec,
    NetworkInstance,
    mean_trajectory,
    visit_charge_kwh,
)

CYCLE_G1 = 1331.0
CYCLE_G2 = 1.825
DEGENERATE_TERM = 1e-9

SIM_CSV_HEADER = ["line_id", "feasibility_pct", "runs", "scenarios"]
LIFETIME_CSV_HEADER = ["line_id", "capacity_kwh", "n_cycle", "cost_per_cycle_eur"]


class ChargingMode(str, Enum):
    LINEAR_CAPPED = "linear"  # gain power * dwell, capped at the upper level
    FULL_RECHARGE_FF = "full-ff"  # fast-feeding stops refill to the upper level


@dataclass(frozen=True)
class SimConfig:
    dist: DistSpec
    scenarios_per_run: int = 100
    runs: int = 100
    seed: int = 0
    mode: ChargingMode = ChargingMode.LINEAR_CAPPED
    jobs: int = 1

    def __post_init__(self):
        if self.scenarios_per_run < 1 or self.runs < 1:
            raise ValueError("scenarios_per_run and runs must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _first_violation(design: ChargingDesign, line: LineSpec, draws: np.ndarray,
                     costs: CostParams, mode: ChargingMode) -> np.ndarray:
    """Visit index of the first violation per scenario, -1 when the trip succeeds."""
    z = design.capacity_kwh[line.id]
    full = costs.soc_upper * z
    floor = costs.soc_lower * z - LEVEL_TOL
    gain = visit_charge_kwh(line, design.placement, costs)
    refill = np.array([
        i > 0 and mode is ChargingMode.FULL_RECHARGE_FF
        and design.placement.get(v.stop) is ChargerType.FAST_FEEDING
        for i, v in enumerate(line.visits)
    ])
    draws = np.atleast_2d(draws)
    level = np.full(draws.shape[0], full)
    first = np.full(draws.shape[0], -1)
    for s in range(1, len(line.visits)):
        prev = s - 1
        if refill[prev]:
            level = np.full_like(level, full)
        elif gain[prev] > 0:
            level = np.minimum(full, level + gain[prev])
        level = level - draws[:, s - 1]
        hit = (level < floor) & (first < 0)
        first[hit] = s
    return first


def trip_feasible(design: ChargingDesign, line: LineSpec, draws: Sequence[float],
                  costs: CostParams,
                  mode: ChargingMode = ChargingMode.LINEAR_CAPPED) -> tuple[bool, Optional[int]]:
    """Replay one trip; return success and the stop of the first violation."""
    draws = np.asarray(draws, dtype=float)
    if draws.shape != (line.n_segments,):
        raise ValueError(f"expected {line.n_segments} draws, got {draws.shape}")
    first = int(_first_violation(design, line, draws[None, :], costs, mode)[0])
    if first < 0:
        return True, None
    return False, line.visits[first].stop


def _rng(seed: int, run: int, line_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run, line_id)))


@dataclass
class SimulationReport:
    """Feasibility per line; counts are summed over runs."""

    runs: int
    scenarios: int
    run_rates: dict[int, np.ndarray]  # per line, one percentage per run
    feasible: dict[int, int]
    violations: dict[int, dict[int, int]]  # per line: stop -> count of first violations

    @property
    def line_rates(self) -> dict[int, float]:
        return {k: float(np.mean(v)) for k, v in self.run_rates.items()}

    @property
    def network_average(self) -> float:
        return float(np.mean(list(self.line_rates.values())))

    def total_trials(self) -> int:
        return self.runs * self.scenarios

    def wilson_interval(self, line_id: int, z: float = 1.959964) -> tuple[float, float]:
        """95% Wilson score interval of a line's feasibility fraction."""
        n = self.total_trials()
        p = self.feasible[line_id] / n
        denom = 1 + z * z / n
        centre = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        return max(0.0, centre - half), min(1.0, centre + half)

    def rows(self):
        for k in sorted(self.run_rates):
            yield [k, f"{self.line_rates[k]:.6f}", self.runs, self.scenarios]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SIM_CSV_HEADER)
            w.writerows(self.rows())

    def write_violations_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["line_id", "stop", "violations"])
            for k in sorted(self.violations):
                for stop, count in sorted(self.violations[k].items()):
                    w.writerow([k, stop, count])


def _one_run(design, inst, cfg: SimConfig, run: int):
    out = {}
    for line in inst.lines:
        rng = _rng(cfg.seed, run, line.id)
        draws = cfg.dist.draw(rng, line.segment_means(), line.segment_maxima(),
                              cfg.scenarios_per_run)
        first = _first_violation(design, line, draws, inst.costs, cfg.mode)
        stops = [line.visits[i].stop for i in first[first >= 0]]
        out[line.id] = (int(np.count_nonzero(first < 0)), stops)
    return out


def run_monte_carlo(design: ChargingDesign, inst: NetworkInstance, cfg: SimConfig) -> SimulationReport:
    """Feasibility rates over ``runs`` batches of ``scenarios_per_run`` trips.

    Draws for (run, line) come from their own seeded stream, so the report
    does not depend on ``jobs`` or on scheduling order.
    """
    for line in inst.lines:
        if line.id not in design.capacity_kwh:
            raise KeyError(f"design has no capacity for line {line.id}")
    if cfg.jobs == 1:
        results = [_one_run(design, inst, cfg, r) for r in range(cfg.runs)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda r: _one_run(design, inst, cfg, r), range(cfg.runs)))
    run_rates, feasible, violations = {}, {}, {}
    for line in inst.lines:
        k = line.id
        counts = np.array([res[k][0] for res in results], dtype=float)
        run_rates[k] = counts / cfg.scenarios_per_run * 100.0
        feasible[k] = int(counts.sum())
        hist: dict[int, int] = {}
        for res in results:
            for stop in res[k][1]:
                hist[stop] = hist.get(stop, 0) + 1
        violations[k] = hist
    return SimulationReport(cfg.runs, cfg.scenarios_per_run, run_rates, feasible, violations)


# --------------------------------------------------------------------------
# battery lifetime
# --------------------------------------------------------------------------

def cycle_life(dods: Sequence[float], charges: Sequence[float],
               g1: float = CYCLE_G1, g2: float = CYCLE_G2) -> float:
    """Cycles to failure, ``g1 * sum(dod^-g2 + charge^-g2)``.

    Terms whose fraction is at most 1e-9 are skipped because the power is
    undefined at zero.
    """
    total = 0.0
    for frac in list(dods) + list(charges):
        if frac > DEGENERATE_TERM:
            total += frac ** (-g2)
    return g1 * total


@dataclass(frozen=True)
class LineLifetime:
    line_id: int
    capacity_kwh: float
    n_cycle: float
    cost_per_cycle_eur: float


@dataclass
class LifetimeReport:
    lines: list[LineLifetime]
    metadata: dict = field(default_factory=lambda: {"g1": CYCLE_G1, "g2": CYCLE_G2})
    relative_diff_pct: Optional[dict[int, float]] = None

    def line(self, line_id: int) -> LineLifetime:
        return next(l for l in self.lines if l.line_id == line_id)

    def compare_to(self, benchmark: "LifetimeReport") -> "LifetimeReport":
        """Relative cost-per-cycle difference (%) of each line against a benchmark."""
        diffs = {}
        for l in self.lines:
            ref = benchmark.line(l.line_id).cost_per_cycle_eur
            diffs[l.line_id] = (l.cost_per_cycle_eur - ref) / ref * 100.0
        return LifetimeReport(self.lines, dict(self.metadata), diffs)

    @property
    def network_relative_diff_pct(self) -> Optional[float]:
        if self.relative_diff_pct is None:
            return None
        return float(np.mean(list(self.relative_diff_pct.values())))

    def write_csv(self, path) -> None:
        header = list(LIFETIME_CSV_HEADER)
        if self.relative_diff_pct is not None:
            header.append("relative_cost_diff_pct")
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for l in self.lines:
                row = [l.line_id, f"{l.capacity_kwh:.6f}", f"{l.n_cycle:.6f}",
                       f"{l.cost_per_cycle_eur:.6f}"]
                if self.relative_diff_pct is not None:
                    row.append(f"{self.relative_diff_pct[l.line_id]:.6f}")
                w.writerow(row)


def battery_lifetime(design: ChargingDesign, inst: NetworkInstance) -> LifetimeReport:
    """Cycle life and cost per cycle from the mean-consumption trajectory."""
    out = []
    beta = inst.costs.battery_cost_per_kwh
    for line in inst.lines:
        z = design.capacity_kwh.get(line.id)
        if z is None:
            raise KeyError(f"design has no capacity for line {line.id}")
        if z <= 0:
            raise ValueError(f"line {line.id}: capacity must be > 0 for lifetime analysis")
        traj = mean_trajectory(design, line, inst.costs)
        dods = (z - traj.arrival_kwh[1:]) / z
        charges = (z - traj.departure_kwh[1:]) / z
        n_cycle = cycle_life(dods, charges)
        out.append(LineLifetime(line.id, z, n_cycle, beta * z / n_cycle))
    return LifetimeReport(out)
