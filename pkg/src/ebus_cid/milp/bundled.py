"""Exact small-model MILP solver: depth-first branching over binaries.

Each node solves the LP relaxation with the bundled simplex and is pruned
when the relaxation is infeasible or cannot beat the incumbent. Branching
always picks the lowest-id fractional binary, so results are reproducible.
"""

from __future__ import annotations

import itertools
import math
import time
from typing import Optional

import numpy as np

from .model import MilpModel, SolveResult, SolveStatus, TooManyBinaries
from .simplex import solve_lp

DEFAULT_MAX_BINARIES = 24
INT_TOL = 1e-7


def _cutoff(incumbent: float) -> float:
    """Relaxation values at or above this cannot improve the incumbent."""
    if math.isinf(incumbent):
        return incumbent
    return incumbent - 1e-9 * max(1.0, abs(incumbent))


def solve_bundled(
    model: MilpModel,
    max_binaries: int = DEFAULT_MAX_BINARIES,
    time_s: Optional[float] = None,
    exhaustive: bool = False,
) -> SolveResult:
    """Solve ``model`` exactly.

    ``exhaustive=True`` disables pruning and enumerates every binary
    assignment; it exists to cross-check the pruned search.
    """
    start = time.perf_counter()
    c, A, senses, b, lb, ub, is_bin = model.dense()
    bins = np.flatnonzero(is_bin)
    if bins.size > max_binaries:
        raise TooManyBinaries(
            f"{bins.size} binaries exceed the bundled solver limit of {max_binaries}"
        )
    deadline = None if time_s is None else start + time_s

    def lp(fix: dict[int, int]):
        lo, hi = lb.copy(), ub.copy()
        for j, v in fix.items():
            lo[j] = hi[j] = v
        return solve_lp(c, A, senses, b, lo, hi)

    if exhaustive:
        return _enumerate(lp, bins, start)

    best_x, best_obj = None, math.inf
    nodes = 0
    timed_out = False
    unbounded = False
    stack: list[tuple[dict[int, int], float]] = [({}, -math.inf)]
    while stack:
        if deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            break
        fix, parent_bound = stack.pop()
        if parent_bound >= _cutoff(best_obj):
            continue
        res = lp(fix)
        nodes += 1
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            unbounded = True
            break
        if res.objective >= _cutoff(best_obj):
            continue
        frac = [
            int(j) for j in bins
            if j not in fix and abs(res.x[j] - round(res.x[j])) > INT_TOL
        ]
        if not frac:
            x = res.x
            if any(j not in fix for j in bins):
                full = dict(fix)
                full.update({int(j): int(round(x[j])) for j in bins if j not in fix})
                res = lp(full)
                nodes += 1
                if res.status != "optimal":
                    continue
                x = res.x
            if res.objective < _cutoff(best_obj):
                best_x, best_obj = x, res.objective
            continue
        j = frac[0]
        near = int(round(res.x[j]))
        for v in (1 - near, near):  # nearer child popped first
            child = dict(fix)
            child[j] = v
            stack.append((child, res.objective))

    elapsed = time.perf_counter() - start
    if unbounded:
        return SolveResult(SolveStatus.UNBOUNDED, wall_time_s=elapsed, nodes=nodes)
    if timed_out:
        open_bounds = [pb for _, pb in stack]
        bound = min(open_bounds + [best_obj]) if open_bounds else best_obj
        return SolveResult(
            SolveStatus.TIME_LIMIT, best_x, best_obj if best_x is not None else math.nan,
            bound, elapsed, nodes,
        )
    if best_x is None:
        return SolveResult(SolveStatus.INFEASIBLE, wall_time_s=elapsed, nodes=nodes)
    return SolveResult(SolveStatus.OPTIMAL, best_x, best_obj, best_obj, elapsed, nodes)


def _enumerate(lp, bins, start) -> SolveResult:
    best_x, best_obj = None, math.inf
    nodes = 0
    for bits in itertools.product((0, 1), repeat=bins.size):
        res = lp({int(j): v for j, v in zip(bins, bits)})
        nodes += 1
        if res.status == "unbounded":
            return SolveResult(SolveStatus.UNBOUNDED, nodes=nodes,
                               wall_time_s=time.perf_counter() - start)
        if res.status == "optimal" and res.objective < best_obj:
            best_x, best_obj = res.x, res.objective
    elapsed = time.perf_counter() - start
    if best_x is None:
        return SolveResult(SolveStatus.INFEASIBLE, wall_time_s=elapsed, nodes=nodes)
    return SolveResult(SolveStatus.OPTIMAL, best_x, best_obj, best_obj, elapsed, nodes)
