"""Canonical CPLEX-LP text for :class:`MilpModel` and the solution grammar.

The writer emits every variable in the ``Bounds`` section in id order, so a
parsed model gets back the same ids and re-emits byte-identical text.

Solution files are plain text::

    =status= Optimal
    =obj= 11666.6666667
    =bound= 11666.6666667      (optional)
    z_0 6.66666666667
    ...

One ``name value`` pair per line; blank lines and lines starting with ``#``
are ignored.
"""

from __future__ import annotations

import math
import re
from typing import Optional

import numpy as np

from .model import (
    MilpError,
    MilpModel,
    Sense,
    SolutionParseError,
    SolveResult,
    SolveStatus,
    VarKind,
    VarRole,
)

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")
_ROLE_BY_PREFIX = {r.value: r for r in VarRole if r is not VarRole.AUX}


def fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def _terms(coeffs, names) -> str:
    parts = []
    for i, (v, c) in enumerate(coeffs):
        sign = "-" if c < 0 else "+"
        mag = fmt(abs(c))
        if i == 0:
            parts.append(f"{'-' if c < 0 else ''}{mag} {names[v]}")
        else:
            parts.append(f"{sign} {mag} {names[v]}")
    return " ".join(parts)


def write_lp_text(m: MilpModel) -> str:
    names = [v.name for v in m.variables]
    for n in names:
        if not n or not _NAME_RE.match(n):
            raise MilpError(f"invalid or missing variable name {n!r}")
    out = [f"\\ model {m.name}", "Minimize"]
    obj = _terms(sorted(m.objective.items()), names)
    out.append(f" obj: {obj}" if obj else " obj:")
    out.append("Subject To")
    for con in m.constraints:
        if not _NAME_RE.match(con.name):
            raise MilpError(f"invalid constraint name {con.name!r}")
        lhs = _terms(con.coeffs, names) or f"0 {names[0]}"
        op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}[con.sense]
        out.append(f" {con.name}: {lhs} {op} {fmt(con.rhs)}")
    out.append("Bounds")
    for v in m.variables:
        if math.isinf(v.ub):
            out.append(f" {v.name} >= {fmt(v.lb)}")
        elif v.lb == v.ub:
            out.append(f" {v.name} = {fmt(v.lb)}")
        else:
            out.append(f" {fmt(v.lb)} <= {v.name} <= {fmt(v.ub)}")
    bins = [v.name for v in m.variables if v.kind is VarKind.BINARY]
    if bins:
        out.append("Binaries")
        out.extend(f" {n}" for n in bins)
    out.append("End")
    return "\n".join(out) + "\n"


_TERM_RE = re.compile(r"([+-]?)\s*([0-9.eE+-]+|inf)\s+([A-Za-z_][A-Za-z0-9_.\[\]]*)")


def _parse_terms(text: str, line_no: int):
    text = text.strip()
    if not text:
        return []
    out = []
    pos = 0
    for mt in _TERM_RE.finditer(text):
        if text[pos:mt.start()].strip():
            raise SolutionParseError(f"cannot parse {text!r}", line_no)
        sign = -1.0 if mt.group(1) == "-" else 1.0
        out.append((mt.group(3), sign * float(mt.group(2))))
        pos = mt.end()
    if text[pos:].strip():
        raise SolutionParseError(f"cannot parse {text!r}", line_no)
    return out


def _role_for(name: str) -> VarRole:
    return _ROLE_BY_PREFIX.get(name.split("_", 1)[0], VarRole.AUX)


def parse_lp_text(text: str) -> MilpModel:
    """Parse text produced by :func:`write_lp_text` (the canonical subset)."""
    lines = text.splitlines()
    name = "model"
    section = None
    objective = []
    rows = []
    bounds = []
    binaries = set()
    for no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if line.startswith("\\ model "):
                name = line[len("\\ model "):]
            continue
        key = line.lower()
        if key in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = key
            continue
        if section == "minimize":
            body = line.split(":", 1)[1] if ":" in line else line
            objective = _parse_terms(body, no)
        elif section == "subject to":
            label, body = line.split(":", 1)
            mt = re.match(r"(.*?)(<=|>=|=)\s*(\S+)$", body.strip())
            if not mt:
                raise SolutionParseError(f"bad constraint {line!r}", no)
            sense = {"<=": Sense.LE, ">=": Sense.GE, "=": Sense.EQ}[mt.group(2)]
            rows.append((label.strip(), _parse_terms(mt.group(1), no), sense, float(mt.group(3))))
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
                bounds.append((parts[2], float(parts[0]), float(parts[4])))
            elif len(parts) == 3 and parts[1] == ">=":
                bounds.append((parts[0], float(parts[2]), math.inf))
            elif len(parts) == 3 and parts[1] == "=":
                bounds.append((parts[0], float(parts[2]), float(parts[2])))
            else:
                raise SolutionParseError(f"bad bound {line!r}", no)
        elif section == "binaries":
            binaries.update(line.split())
        else:
            raise SolutionParseError(f"unexpected text {line!r}", no)

    m = MilpModel(name=name)
    for vname, lo, hi in bounds:
        kind = VarKind.BINARY if vname in binaries else VarKind.CONTINUOUS
        m.add_var(vname, _role_for(vname), kind, lo, hi)
    ids = {v.name: i for i, v in enumerate(m.variables)}
    m.set_objective((ids[n], c) for n, c in objective)
    for label, terms, sense, rhs in rows:
        m.add_constr(((ids[n], c) for n, c in terms), sense, rhs, label)
    return m


def write_solution_text(m: MilpModel, res: SolveResult) -> str:
    out = [f"=status= {res.status.value}"]
    if res.values is not None:
        out.append(f"=obj= {res.objective!r}")
    if math.isfinite(res.bound):
        out.append(f"=bound= {res.bound!r}")
    if res.values is not None:
        for v, x in zip(m.variables, res.values):
            out.append(f"{v.name} {float(x)!r}")
    return "\n".join(out) + "\n"


def parse_solution_text(text: str, m: MilpModel, wall_time_s: float = 0.0) -> SolveResult:
    status: Optional[SolveStatus] = None
    obj = math.nan
    bound = math.nan
    values: dict[str, float] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"expected 'name value', got {line!r}", no)
        key, val = parts
        try:
            if key == "=status=":
                status = SolveStatus(val)
                continue
            num = float(val)
        except ValueError:
            raise SolutionParseError(f"bad value in {line!r}", no) from None
        if key == "=obj=":
            obj = num
        elif key == "=bound=":
            bound = num
        else:
            values[key] = num
    if status is None:
        raise SolutionParseError("missing =status= header")
    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED) or (
        status is SolveStatus.TIME_LIMIT and not values
    ):
        return SolveResult(status, bound=bound, wall_time_s=wall_time_s)
    missing = [v.name for v in m.variables if v.name not in values]
    if missing:
        raise SolutionParseError(f"solution lacks {len(missing)} variables, e.g. {missing[0]}")
    x = np.array([values[v.name] for v in m.variables])
    if math.isnan(obj):
        obj = m.objective_value(x)
    if math.isnan(bound) and status is SolveStatus.OPTIMAL:
        bound = obj
    return SolveResult(status, x, obj, bound, wall_time_s)
