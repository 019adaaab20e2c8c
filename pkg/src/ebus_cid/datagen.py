"""Synthetic instances and energy-consumption samples.

All generators are pure functions of their arguments and seed. Random
streams are derived with ``numpy.random.SeedSequence`` spawn keys so that
any sub-stream can be regenerated independently of evaluation order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .network import (
    ZERO_SEGMENT,
    CostParams,
    LineSpec,
    NetworkInstance,
    SegmentStat,
    Stop,
    Visit,
    default_costs,
)

KWH_PER_KM = 1.3
GRID_SIDE = 10
DWELL_MEAN_S = 20.0
DWELL_STD_S = 2.0  # "N(20,4)" read as variance 4
DWELL_MIN_S = 5.0


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def draw_dwell(rng: np.random.Generator, size: int) -> np.ndarray:
    """Dwell times (s): Normal(20, sd 2) redrawn below the 5 s floor."""
    out = rng.normal(DWELL_MEAN_S, DWELL_STD_S, size)
    bad = out < DWELL_MIN_S
    while bad.any():
        out[bad] = rng.normal(DWELL_MEAN_S, DWELL_STD_S, int(bad.sum()))
        bad = out < DWELL_MIN_S
    return out


def _segment(distance_km: float, omega: float) -> SegmentStat:
    mean = KWH_PER_KM * distance_km
    return SegmentStat(mean, mean * (1.0 + omega), distance_km)


def generate_grid_network(
    n_lines: int,
    stops_per_line: int,
    seed: int,
    costs: Optional[CostParams] = None,
    spacing_km: float = 1.0,
    fleet_size: int = 10,
) -> NetworkInstance:
    """Lines over a 10x10 lattice of candidate stops sharing one depot.

    Stop ids 0..99 are the lattice nodes (row-major); id 100 is the depot,
    placed one lattice step diagonally outside the corner node 0. Every line
    leaves the depot, visits ``stops_per_line`` distinct lattice nodes and
    returns to the depot.
    """
    if n_lines < 1:
        raise ValueError("n_lines must be >= 1")
    if stops_per_line < 2:
        raise ValueError("stops_per_line must be >= 2")
    if stops_per_line > GRID_SIDE * GRID_SIDE:
        raise ValueError(f"stops_per_line must be <= {GRID_SIDE * GRID_SIDE}")
    costs = costs or default_costs()

    coords = [
        (float(c) * spacing_km, float(r) * spacing_km)
        for r in range(GRID_SIDE)
        for c in range(GRID_SIDE)
    ]
    depot = len(coords)
    coords.append((-spacing_km, -spacing_km))
    xy = np.array(coords)

    lines = []
    for k in range(n_lines):
        rng = _rng(seed, 0, k)
        chosen = list(rng.choice(depot, size=stops_per_line, replace=False))
        route = _walk_order(chosen, depot, xy, rng)
        seq = [depot] + route + [depot]
        omegas = rng.uniform(0.0, 1.0, len(seq) - 1)
        dwell = draw_dwell(rng, len(seq))
        visits = [Visit(depot, ZERO_SEGMENT, float(dwell[0]))]
        for i in range(1, len(seq)):
            d = float(np.hypot(*(xy[seq[i]] - xy[seq[i - 1]])))
            visits.append(Visit(int(seq[i]), _segment(d, float(omegas[i - 1])), float(dwell[i])))
        lines.append(LineSpec(k, tuple(visits), fleet_size, True))

    stops = tuple(Stop(i, coords[i][0], coords[i][1]) for i in range(len(coords)))
    meta = {
        "generator": "grid",
        "n_lines": n_lines,
        "stops_per_line": stops_per_line,
        "seed": seed,
        "spacing_km": spacing_km,
    }
    return NetworkInstance(tuple(lines), stops, costs, frozenset(), meta)


def _walk_order(chosen, start, xy, rng, breadth: int = 3) -> list[int]:
    """Order stops by a random walk that hops to one of the nearest remaining."""
    remaining = list(chosen)
    cur = start
    route = []
    while remaining:
        d = np.hypot(*(xy[remaining] - xy[cur]).T)
        order = np.argsort(d, kind="stable")[:breadth]
        pick = remaining.pop(int(order[rng.integers(len(order))]))
        route.append(int(pick))
        cur = pick
    return route


def generate_tiny_network(
    seed: int,
    n_lines: int = 2,
    n_candidates: int = 4,
    costs: Optional[CostParams] = None,
) -> NetworkInstance:
    """Small one-way network for exhaustive cross-checks.

    Stop 0 is a shared terminal and stops ``1..n_candidates`` are charger
    candidates. Each line visits a random ordered subset of them. Fleet sizes
    vary so that chargers are sometimes worth building.
    """
    if n_lines < 1 or n_candidates < 1:
        raise ValueError("need at least one line and one candidate stop")
    costs = costs or default_costs()
    lines = []
    for k in range(n_lines):
        rng = _rng(seed, 5, k)
        size = int(rng.integers(1, n_candidates + 1))
        route = [int(s) + 1 for s in rng.choice(n_candidates, size=size, replace=False)]
        dwell = draw_dwell(rng, size + 1)
        visits = [Visit(0, ZERO_SEGMENT, float(dwell[0]))]
        for i, stop in enumerate(route, start=1):
            km = float(rng.uniform(0.3, 3.0))
            visits.append(Visit(stop, _segment(km, float(rng.uniform(0.0, 1.0))), float(dwell[i])))
        fleet = int(rng.choice([1, 5, 10, 20, 40]))
        lines.append(LineSpec(k, tuple(visits), fleet, False))
    stops = tuple(Stop(i) for i in range(n_candidates + 1))
    meta = {"generator": "tiny", "seed": seed}
    return NetworkInstance(tuple(lines), stops, costs, frozenset(), meta)


# --------------------------------------------------------------------------
# Consumption distributions
# --------------------------------------------------------------------------

class DistKind(str, Enum):
    UNIFORM = "uniform"
    TRI_SYMMETRIC = "tri-sym"
    TRI_RIGHT = "tri-right"
    TRI_LEFT = "tri-left"
    TRI_CUSTOM = "tri-custom"
    DEGENERATE = "degenerate"


_MODE_FRACTION = {
    DistKind.TRI_SYMMETRIC: 0.5,
    DistKind.TRI_RIGHT: 0.0,
    DistKind.TRI_LEFT: 1.0,
}


@dataclass(frozen=True)
class DistSpec:
    """Per-segment consumption distribution.

    The support runs from ``low`` to ``scale * max_kwh`` where ``low`` is 0
    (``low_at_mean=False``) or the segment mean. Triangular modes sit at a
    fraction of that support. ``DEGENERATE`` returns ``scale * mean_kwh``.
    """

    kind: DistKind
    mode_fraction: Optional[float] = None
    scale: float = 1.0
    low_at_mean: bool = False

    def __post_init__(self):
        if self.kind is DistKind.TRI_CUSTOM:
            if self.mode_fraction is None or not 0.0 <= self.mode_fraction <= 1.0:
                raise ValueError("tri-custom needs mode_fraction in [0, 1]")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    def support(self, mean: np.ndarray, high: np.ndarray):
        hi = self.scale * np.asarray(high, dtype=float)
        lo = np.asarray(mean, dtype=float) if self.low_at_mean else np.zeros_like(hi)
        return lo, np.maximum(hi, lo)

    def mode(self) -> Optional[float]:
        if self.kind is DistKind.TRI_CUSTOM:
            return self.mode_fraction
        return _MODE_FRACTION.get(self.kind)

    def draw(self, rng: np.random.Generator, mean, high, size: int) -> np.ndarray:
        """``size`` draws for each segment; result shape ``(size, n_segments)``."""
        mean = np.asarray(mean, dtype=float)
        if self.kind is DistKind.DEGENERATE:
            return np.broadcast_to(self.scale * mean, (size, mean.size)).copy()
        lo, hi = self.support(mean, high)
        u = rng.random((size, mean.size))
        if self.kind is DistKind.UNIFORM:
            return lo + u * (hi - lo)
        return triangular_ppf(u, lo, hi, self.mode())

    def mean(self, mean, high) -> np.ndarray:
        mean = np.asarray(mean, dtype=float)
        if self.kind is DistKind.DEGENERATE:
            return self.scale * mean
        lo, hi = self.support(mean, high)
        if self.kind is DistKind.UNIFORM:
            return (lo + hi) / 2
        c = lo + self.mode() * (hi - lo)
        return (lo + hi + c) / 3

    def to_text(self) -> str:
        low = "mubar" if self.low_at_mean else "0"
        if self.kind is DistKind.DEGENERATE:
            body = "degenerate:mubar"
        elif self.kind is DistKind.UNIFORM:
            body = f"uniform:{low},muhat"
        else:
            m = self.mode()
            mid = {0.0: low, 1.0: "muhat", 0.5: "mid"}.get(m, f"{m!r}")
            body = f"tri:{low},muhat,{mid}"
        return body if self.scale == 1.0 else f"{body};scale={self.scale!r}"


def triangular_ppf(u, lo, hi, mode_fraction: float) -> np.ndarray:
    """Inverse CDF of the triangular law on [lo, hi] with mode at a fraction."""
    width = hi - lo
    f = mode_fraction
    left = lo + np.sqrt(u * f) * width
    right = hi - np.sqrt((1.0 - u) * (1.0 - f)) * width
    return np.where(u < f, left, right)


def parse_dist(text: str) -> DistSpec:
    """Parse ``uniform:0,muhat``, ``tri:0,muhat,mid`` and friends.

    The lower endpoint is ``0`` or ``mubar``; a triangular mode is ``mid``,
    the low endpoint, ``muhat`` or a fraction in [0, 1]. A trailing
    ``;scale=1.2`` (or ``,scale=1.2``) stretches the upper endpoint.
    """
    raw = text.strip()
    scale = 1.0
    for sep in (";", ","):
        if f"{sep}scale=" in raw:
            raw, s = raw.split(f"{sep}scale=", 1)
            scale = float(s)
            break
    if ":" not in raw:
        raise ValueError(f"unknown distribution {text!r}")
    head, args = raw.split(":", 1)
    parts = [p.strip() for p in args.split(",")]
    head = head.strip().lower()
    if head == "degenerate":
        return DistSpec(DistKind.DEGENERATE, scale=scale)
    if len(parts) < 2 or parts[1] != "muhat" or parts[0] not in ("0", "mubar"):
        raise ValueError(f"unknown distribution {text!r}")
    low_at_mean = parts[0] == "mubar"
    if head == "uniform" and len(parts) == 2:
        return DistSpec(DistKind.UNIFORM, scale=scale, low_at_mean=low_at_mean)
    if head == "tri" and len(parts) == 3:
        mode = parts[2]
        if mode == "mid":
            kind, frac = DistKind.TRI_SYMMETRIC, None
        elif mode == parts[0]:
            kind, frac = DistKind.TRI_RIGHT, None
        elif mode == "muhat":
            kind, frac = DistKind.TRI_LEFT, None
        else:
            try:
                frac = float(mode)
            except ValueError:
                raise ValueError(f"unknown distribution {text!r}") from None
            kind = DistKind.TRI_CUSTOM
        return DistSpec(kind, mode_fraction=frac, scale=scale, low_at_mean=low_at_mean)
    raise ValueError(f"unknown distribution {text!r}")


# --------------------------------------------------------------------------
# Sample sets
# --------------------------------------------------------------------------

@dataclass
class EnergySampleSet:
    """Observed consumption per line: array of shape ``(n, n_segments)``."""

    samples: dict[int, np.ndarray]
    n: int
    seed: Optional[int] = None
    dist: str = ""

    def prefix_sums(self, line_id: int) -> np.ndarray:
        """Sample-path prefix sums with a leading zero column for the terminal."""
        a = self.samples[line_id]
        return np.concatenate([np.zeros((a.shape[0], 1)), np.cumsum(a, axis=1)], axis=1)


def sample_energy(inst: NetworkInstance, dist: DistSpec, n: int, seed: int) -> EnergySampleSet:
    if n < 1:
        raise ValueError("n must be >= 1")
    out = {}
    for line in inst.lines:
        rng = _rng(seed, 1, line.id)
        out[line.id] = dist.draw(rng, line.segment_means(), line.segment_maxima(), n)
    return EnergySampleSet(out, n, seed, dist.to_text())


def degenerate_samples(inst: NetworkInstance, n: int) -> EnergySampleSet:
    return sample_energy(inst, DistSpec(DistKind.DEGENERATE), n, 0)


def save_samples(samples: EnergySampleSet, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "segment_index", "sample_index", "kwh"])
        for line_id in sorted(samples.samples):
            a = samples.samples[line_id]
            for seg in range(a.shape[1]):
                for j in range(a.shape[0]):
                    w.writerow([line_id, seg + 1, j, repr(float(a[j, seg]))])
    sidecar = {"n": samples.n, "seed": samples.seed, "dist": samples.dist}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_samples(path) -> EnergySampleSet:
    """Read the CSV written by :func:`save_samples` (segment_index is 1-based)."""
    path = Path(path)
    rows: dict[int, dict[tuple[int, int], float]] = {}
    with path.open() as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(int(rec["line_id"]), {})[
                (int(rec["sample_index"]), int(rec["segment_index"]))
            ] = float(rec["kwh"])
    samples = {}
    for line_id, cells in rows.items():
        n = 1 + max(j for j, _ in cells)
        m = max(s for _, s in cells)
        a = np.full((n, m), np.nan)
        for (j, s), v in cells.items():
            a[j, s - 1] = v
        if np.isnan(a).any():
            raise ValueError(f"{path}: line {line_id} has missing samples")
        samples[line_id] = a
    ns = {a.shape[0] for a in samples.values()}
    if len(ns) > 1:
        raise ValueError(f"{path}: sample counts differ between lines")
    meta = {}
    sidecar = path.with_suffix(path.suffix + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    return EnergySampleSet(samples, ns.pop() if ns else 0, meta.get("seed"), meta.get("dist", ""))


# --------------------------------------------------------------------------
# Rotterdam-like fixture
# --------------------------------------------------------------------------

def rotterdam_fixture(seed: int = 2024) -> NetworkInstance:
    """Surrogate of the three-line Rotterdam study network.

    Lines are indexed 0, 1, 2 for the public lines 33, 38 and 40. Line 33
    (15 visits) and line 38 (11 visits) are circular from the shared
    terminal; line 40 (28 visits) runs one-way to a second terminal. Line 33
    serves three stops of line 40 in both directions. Distances are synthetic
    because the real inter-stop distances are not published.
    """
    rng = _rng(seed, 2)
    terminal = 0
    next_id = 1

    def new_stops(k):
        nonlocal next_id
        ids = list(range(next_id, next_id + k))
        next_id += k
        return ids

    # line 40: terminal -> 26 intermediate stops -> far terminal (28 visits)
    l40_mid = new_stops(26)
    l40_end = new_stops(1)[0]
    l40_seq = [terminal] + l40_mid + [l40_end]
    shared = l40_mid[1:4]
    # line 33: out through its own stops and the shared ones, back the same way
    l33_own = new_stops(5)
    l33_out = l33_own[:2] + shared
    l33_seq = [terminal] + l33_out + l33_own[2:] + list(reversed(shared)) + l33_own[:2][::-1]
    l33_seq = l33_seq + [terminal]
    # line 38: short circular intra-city loop (11 visits)
    l38_seq = [terminal] + new_stops(9) + [terminal]

    spacing = {0: (0.45, 0.9), 1: (0.3, 0.6), 2: (0.8, 2.4)}
    seqs = {0: l33_seq, 1: l38_seq, 2: l40_seq}
    seg_km: dict[tuple[int, int], float] = {}
    lines = []
    for k in (0, 1, 2):
        seq = seqs[k]
        lo, hi = spacing[k]
        line_rng = _rng(seed, 3, k)
        dwell = draw_dwell(line_rng, len(seq))
        visits = [Visit(terminal, ZERO_SEGMENT, float(dwell[0]))]
        for i in range(1, len(seq)):
            a, b = seq[i - 1], seq[i]
            key = (min(a, b), max(a, b))
            if key not in seg_km:
                seg_km[key] = float(rng.uniform(lo, hi))
            omega = float(line_rng.uniform(0.0, 1.0))
            visits.append(Visit(b, _segment(seg_km[key], omega), float(dwell[i])))
        lines.append(LineSpec(k, tuple(visits), 10, k in (0, 1)))

    stops = tuple(Stop(i) for i in range(next_id))
    meta = {
        "generator": "rotterdam-surrogate",
        "surrogate": True,
        "line_names": {"0": "33", "1": "38", "2": "40"},
        "seed": seed,
    }
    return NetworkInstance(tuple(lines), stops, default_costs(), frozenset(), meta)
