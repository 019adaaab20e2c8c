"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Small and slow by design: it is the reference LP engine behind the bundled
branch-and-bound and is meant for models with at most a few hundred rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import MilpError, Sense

TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray] = None
    objective: float = math.nan
    basis: Optional[list[int]] = None
    reduced_costs: Optional[np.ndarray] = None
    basic_values: Optional[np.ndarray] = None
    iterations: int = 0


class _Tableau:
    """Rows 0..m-1 are constraints, row m is the objective (reduced costs)."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.iterations = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_costs(self, c: np.ndarray) -> None:
        n = self.T.shape[1] - 1
        row = np.zeros(n + 1)
        row[: c.size] = c
        for i, j in enumerate(self.basis):
            if row[j] != 0.0:
                row -= row[j] * self.T[i]
        self.T[-1] = row

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> str:
        T = self.T
        while True:
            if self.iterations >= max_iter:
                raise MilpError("simplex iteration limit reached")
            rc = T[-1, :-1]
            cand = np.flatnonzero((rc < -TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])
            col = T[:-1, j]
            pos = np.flatnonzero(col > TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + TOL * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)

    def drop_row(self, r: int) -> None:
        self.T = np.delete(self.T, r, axis=0)
        del self.basis[r]


def solve_lp(
    c: np.ndarray,
    A: np.ndarray,
    senses: Sequence[Sense],
    b: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    max_iter: int = 50_000,
) -> LPResult:
    """Minimise ``c @ x`` subject to row senses and finite lower bounds.

    Variables with ``lb == ub`` are substituted out. Upper bounds become
    explicit rows. The returned ``basis``/``reduced_costs`` refer to the
    internal standard form (shifted variables, then slacks).
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, c.size)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not np.all(np.isfinite(lb)):
        raise MilpError("all variables need a finite lower bound")
    if np.any(lb > ub + TOL):
        return LPResult("infeasible")

    free = np.flatnonzero(ub - lb > TOL)
    fixed_x = lb.copy()
    nf = free.size
    rhs = b - A @ fixed_x
    A_f = A[:, free]

    rows, rhs_rows, kinds = [], [], []
    for i, s in enumerate(senses):
        rows.append(A_f[i])
        rhs_rows.append(rhs[i])
        kinds.append(Sense(s))
    for k, j in enumerate(free):
        if math.isfinite(ub[j]):
            e = np.zeros(nf)
            e[k] = 1.0
            rows.append(e)
            rhs_rows.append(ub[j] - lb[j])
            kinds.append(Sense.LE)

    m = len(rows)
    n_slack = sum(1 for k in kinds if k is not Sense.EQ)
    n_std = nf + n_slack
    A_std = np.zeros((m, n_std + m))
    b_std = np.array(rhs_rows, dtype=float)
    slack_of_row = {}
    col = nf
    for i, (row, k) in enumerate(zip(rows, kinds)):
        A_std[i, :nf] = row
        if k is Sense.LE:
            A_std[i, col] = 1.0
            slack_of_row[i] = col
            col += 1
        elif k is Sense.GE:
            A_std[i, col] = -1.0
            slack_of_row[i] = col
            col += 1
    neg = b_std < 0
    A_std[neg] *= -1.0
    b_std[neg] *= -1.0

    # initial basis: a +1 slack where available, otherwise an artificial
    basis = []
    art_cols = []
    for i in range(m):
        sc = slack_of_row.get(i)
        if sc is not None and A_std[i, sc] > 0:
            basis.append(sc)
        else:
            a = n_std + i
            A_std[i, a] = 1.0
            basis.append(a)
            art_cols.append(a)
    keep = list(range(n_std)) + art_cols
    A_std = A_std[:, keep]
    remap = {old: new for new, old in enumerate(keep)}
    basis = [remap[j] for j in basis]
    art = np.zeros(A_std.shape[1], dtype=bool)
    art[n_std:] = True

    tab = _Tableau(A_std, b_std, basis)
    if art.any():
        tab.set_costs(art.astype(float))
        tab.run(np.ones(A_std.shape[1], dtype=bool), max_iter)
        infeas = -tab.T[-1, -1]
        if infeas > TOL * max(1.0, np.abs(b_std).max(initial=0.0)):
            return LPResult("infeasible", iterations=tab.iterations)
        r = 0
        while r < tab.m:
            if art[tab.basis[r]]:
                nz = np.flatnonzero((np.abs(tab.T[r, :-1]) > TOL) & ~art)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                    r += 1
                else:
                    tab.drop_row(r)
            else:
                r += 1

    cost = np.zeros(A_std.shape[1])
    cost[:nf] = c[free]
    tab.set_costs(cost)
    status = tab.run(~art, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", iterations=tab.iterations)

    z = np.zeros(A_std.shape[1])
    for i, j in enumerate(tab.basis):
        z[j] = tab.T[i, -1]
    x = fixed_x.copy()
    x[free] += z[:nf]
    x = np.where(np.abs(x - np.round(x)) < 1e-12, np.round(x), x)
    return LPResult(
        "optimal",
        x=x,
        objective=float(c @ x),
        basis=list(tab.basis),
        reduced_costs=tab.T[-1, :-1][~art].copy(),
        basic_values=tab.T[:-1, -1].copy(),
        iterations=tab.iterations,
    )
