"""Build, solve and extract a design in one call.

Lines that share no candidate stop are independent: their models have no
common variables. ``solve_design`` solves each such group separately, which
keeps the bundled branch-and-bound small, and merges the designs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .datagen import EnergySampleSet
from .milp.bundled import DEFAULT_MAX_BINARIES, solve_bundled
from .milp.external import solve_external
from .milp.model import MilpModel, SolveResult, SolveStatus
from .models import BoUConfig, DrccConfig, build_bou, build_cid, build_drcc, extract_design
from .network import ChargingDesign, LineSpec, NetworkInstance, design_costs


class ModelKind(str, Enum):
    CID = "cid"
    BOU = "bou"
    DRCC = "drcc"


class Backend(str, Enum):
    BUNDLED = "bundled"
    EXTERNAL = "external"


@dataclass(frozen=True)
class SolveOptions:
    backend: Backend = Backend.BUNDLED
    solver_cmd: Optional[str] = None
    time_limit_s: Optional[float] = None
    max_binaries: int = DEFAULT_MAX_BINARIES
    decompose: bool = True


@dataclass
class SolveOutcome:
    status: SolveStatus
    design: Optional[ChargingDesign]
    objective: float
    bound: float
    wall_time_s: float
    nodes: int
    parts: int

    @property
    def gap(self) -> float:
        return SolveResult(self.status, None, self.objective, self.bound).gap


def build_model(inst: NetworkInstance, kind: ModelKind,
                bou: Optional[BoUConfig] = None,
                drcc: Optional[DrccConfig] = None) -> MilpModel:
    kind = ModelKind(kind)
    if kind is ModelKind.CID:
        return build_cid(inst)
    if kind is ModelKind.BOU:
        if bou is None:
            raise ValueError("the bou model needs a BoUConfig")
        return build_bou(inst, bou)
    if drcc is None:
        raise ValueError("the drcc model needs a DrccConfig")
    return build_drcc(inst, drcc)


def line_components(inst: NetworkInstance) -> list[list[int]]:
    """Groups of line ids linked by shared charger candidates, in id order."""
    parent = {l.id: l.id for l in inst.lines}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    owner: dict[int, int] = {}
    for line in inst.lines:
        for v in line.visits[1:]:
            if v.stop in inst.excluded_stops:
                continue
            if v.stop in owner:
                ra, rb = find(owner[v.stop]), find(line.id)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            else:
                owner[v.stop] = line.id
    groups: dict[int, list[int]] = {}
    for line in inst.lines:
        groups.setdefault(find(line.id), []).append(line.id)
    return [groups[r] for r in sorted(groups)]


def sub_instance(inst: NetworkInstance, line_ids: list[int]) -> NetworkInstance:
    """Instance restricted to some lines, renumbered 0..len-1 in the given order."""
    lines = tuple(
        LineSpec(new, inst.line(old).visits, inst.line(old).fleet_size, inst.line(old).circular)
        for new, old in enumerate(line_ids)
    )
    return NetworkInstance(lines, inst.stops, inst.costs, inst.excluded_stops, inst.metadata)


def _sub_samples(samples: EnergySampleSet, line_ids: list[int]) -> EnergySampleSet:
    return EnergySampleSet(
        {new: samples.samples[old] for new, old in enumerate(line_ids)},
        samples.n, samples.seed, samples.dist,
    )


def solve_model(model: MilpModel, options: SolveOptions,
                time_s: Optional[float] = None) -> SolveResult:
    if Backend(options.backend) is Backend.EXTERNAL:
        return solve_external(model, options.solver_cmd, time_s)
    return solve_bundled(model, max_binaries=options.max_binaries, time_s=time_s)


def solve_design(inst: NetworkInstance, kind: ModelKind,
                 bou: Optional[BoUConfig] = None,
                 drcc: Optional[DrccConfig] = None,
                 options: SolveOptions = SolveOptions()) -> SolveOutcome:
    start = time.perf_counter()
    groups = line_components(inst) if options.decompose else [[l.id for l in inst.lines]]
    placement, capacity = {}, {}
    objective = bound = 0.0
    nodes = 0
    status = SolveStatus.OPTIMAL
    for group in groups:
        if len(groups) == 1:
            part, part_drcc = inst, drcc
        else:
            part = sub_instance(inst, group)
            part_drcc = None if drcc is None else DrccConfig(
                drcc.theta, _sub_samples(drcc.samples, group), drcc.epsilon, drcc.big_m)
        model = build_model(part, kind, bou, part_drcc)
        left = None
        if options.time_limit_s is not None:
            left = max(0.0, options.time_limit_s - (time.perf_counter() - start))
        res = solve_model(model, options, left)
        nodes += res.nodes
        if res.status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED) or res.values is None:
            return SolveOutcome(res.status, None, math.nan, math.nan,
                                time.perf_counter() - start, nodes, len(groups))
        if res.status is not SolveStatus.OPTIMAL:
            status = res.status
        design = extract_design(part, model, res)
        placement.update(design.placement)
        for new, old in enumerate(group):
            capacity[old] = design.capacity_kwh[new if len(groups) > 1 else old]
        objective += res.objective
        bound += res.bound if math.isfinite(res.bound) else -math.inf
    merged = design_costs(inst, placement, capacity)
    return SolveOutcome(status, merged, objective, bound,
                        time.perf_counter() - start, nodes, len(groups))
