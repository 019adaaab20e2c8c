"""Small hand-built instances shared by the test modules."""

from __future__ import annotations

import numpy as np

from ebus_cid.datagen import EnergySampleSet
from ebus_cid.network import (
    ZERO_SEGMENT,
    LineSpec,
    NetworkInstance,
    SegmentStat,
    Stop,
    Visit,
    default_costs,
)


def line_instance(means, maxima=None, dwell=20.0, fleet=1, costs=None, excluded=()):
    """One one-way line: terminal 0 then stops 1..n with the given segments."""
    maxima = list(means) if maxima is None else list(maxima)
    visits = [Visit(0, ZERO_SEGMENT, dwell)]
    for i, (mu, hi) in enumerate(zip(means, maxima), start=1):
        visits.append(Visit(i, SegmentStat(float(mu), float(hi)), dwell))
    stops = tuple(Stop(i) for i in range(len(visits)))
    return NetworkInstance(
        (LineSpec(0, tuple(visits), fleet, False),), stops, costs or default_costs(),
        frozenset(excluded),
    )


def samples_for(values_by_line: dict) -> EnergySampleSet:
    arrays = {k: np.asarray(v, dtype=float) for k, v in values_by_line.items()}
    n = next(iter(arrays.values())).shape[0]
    return EnergySampleSet(arrays, n)


def three_line_instance() -> NetworkInstance:
    """Three independent two-segment lines with long, highly uncertain segments."""
    spec = {
        0: [(6.0, 0.95), (2.0, 0.90)],
        1: [(8.0, 1.00), (3.0, 0.85)],
        2: [(5.0, 0.90), (4.0, 1.00)],
    }
    lines, sid = [], 1
    for k, segs in spec.items():
        visits = [Visit(0, ZERO_SEGMENT, 20.0)]
        for km, omega in segs:
            mu = 1.3 * km
            visits.append(Visit(sid, SegmentStat(mu, mu * (1 + omega), km), 20.0))
            sid += 1
        lines.append(LineSpec(k, tuple(visits), 10, False))
    return NetworkInstance(tuple(lines), tuple(Stop(i) for i in range(sid)), default_costs())
