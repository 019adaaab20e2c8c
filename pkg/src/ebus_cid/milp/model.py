"""Solver-independent MILP representation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional

import numpy as np


class VarRole(str, Enum):
    PLACEMENT = "x"
    CAPACITY = "z"
    DUAL_U = "u"
    DUAL_V = "v"
    DIST_Q = "q"
    DIST_R = "r"
    VIOLATION = "y"
    AUX = "aux"  # variables of hand-built models that are not CID symbols


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"


class MilpError(Exception):
    pass


class TooManyBinaries(MilpError):
    pass


class SolverFailure(MilpError):
    pass


class SolutionParseError(MilpError):
    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no is not None else message)


@dataclass(frozen=True)
class Variable:
    name: str
    role: VarRole
    kind: VarKind
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float


@dataclass
class MilpModel:
    """Minimisation model assembled by the CID builders.

    Variables are addressed by their integer id (insertion order). Rows are
    normalised on insertion: repeated ids are merged and zero coefficients
    dropped. ``index`` is free-form lookup data filled in by model builders.
    """

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    index: dict = field(default_factory=dict)
    _names: dict[str, int] = field(default_factory=dict, repr=False)

    def add_var(
        self,
        name: str,
        role: VarRole = VarRole.AUX,
        kind: VarKind = VarKind.CONTINUOUS,
        lb: float = 0.0,
        ub: float = math.inf,
    ) -> int:
        if not name:
            raise MilpError("variables must be named")
        if name in self._names:
            raise MilpError(f"duplicate variable name {name!r}")
        if kind is VarKind.BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise MilpError(f"{name}: empty bounds [{lb}, {ub}]")
        self.variables.append(Variable(name, role, kind, float(lb), float(ub)))
        self._names[name] = len(self.variables) - 1
        return len(self.variables) - 1

    def add_constr(
        self, coeffs: Iterable[tuple[int, float]], sense: Sense, rhs: float, name: str
    ) -> int:
        merged: dict[int, float] = {}
        for var, c in coeffs:
            if not 0 <= var < len(self.variables):
                raise MilpError(f"{name}: unknown variable id {var}")
            merged[var] = merged.get(var, 0.0) + float(c)
        row = tuple(sorted((v, c) for v, c in merged.items() if c != 0.0))
        self.constraints.append(Constraint(name, row, Sense(sense), float(rhs)))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: Iterable[tuple[int, float]]) -> None:
        obj: dict[int, float] = {}
        for var, c in coeffs:
            obj[var] = obj.get(var, 0.0) + float(c)
        self.objective = {v: c for v, c in sorted(obj.items()) if c != 0.0}

    def var_id(self, name: str) -> int:
        return self._names[name]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def binaries(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind is VarKind.BINARY]

    def vars_with_role(self, role: VarRole) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.role is role]

    def objective_value(self, x) -> float:
        return float(sum(c * x[v] for v, c in self.objective.items()))

    def dense(self):
        """Return ``(c, A, senses, b, lb, ub, is_binary)`` as numpy arrays."""
        n, m = self.n_vars, len(self.constraints)
        c = np.zeros(n)
        for v, coef in self.objective.items():
            c[v] = coef
        A = np.zeros((m, n))
        b = np.empty(m)
        senses = []
        for i, con in enumerate(self.constraints):
            for v, coef in con.coeffs:
                A[i, v] = coef
            b[i] = con.rhs
            senses.append(con.sense)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        is_bin = np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=bool)
        return c, A, senses, b, lb, ub, is_bin

    def max_violation(self, x) -> float:
        """Largest bound or row violation of a point (0 when feasible)."""
        worst = 0.0
        for i, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[i], x[i] - v.ub)
        for con in self.constraints:
            lhs = sum(c * x[v] for v, c in con.coeffs)
            if con.sense is Sense.LE:
                worst = max(worst, lhs - con.rhs)
            elif con.sense is Sense.GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst


@dataclass
class SolveResult:
    status: SolveStatus
    values: Optional[np.ndarray] = None
    objective: float = math.nan
    bound: float = math.nan
    wall_time_s: float = 0.0
    nodes: int = 0

    @property
    def gap(self) -> float:
        if math.isfinite(self.objective) and math.isfinite(self.bound):
            return (self.objective - self.bound) / max(1.0, abs(self.objective))
        return math.inf

    @property
    def has_solution(self) -> bool:
        return self.values is not None

    def value_map(self, model: MilpModel) -> Mapping[str, float]:
        if self.values is None:
            return {}
        return {v.name: float(self.values[i]) for i, v in enumerate(model.variables)}
