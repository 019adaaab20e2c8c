"""Bus network representation: lines, stops, cost parameters and designs.

Energy is always in kWh, charger power in kW and dwell time in seconds, so
the charge delivered during a dwell is ``power_kw * dwell_s / 3600``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

#: Tolerance (kWh) applied to every battery-level comparison.
LEVEL_TOL = 1e-6


class ChargerType(str, Enum):
    STANDARD = "SS"
    FAST_FEEDING = "FF"


CHARGER_TYPES = (ChargerType.STANDARD, ChargerType.FAST_FEEDING)


@dataclass(frozen=True)
class SegmentStat:
    """Consumption on the segment that ends at a visit.

    ``max_kwh`` is the upper end of the consumption range, so the deviation
    used by the robust model is ``max_kwh - mean_kwh``.
    """

    mean_kwh: float
    max_kwh: float
    distance_km: float = 0.0

    @property
    def dev_kwh(self) -> float:
        return self.max_kwh - self.mean_kwh


ZERO_SEGMENT = SegmentStat(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Visit:
    stop: int
    segment: SegmentStat
    dwell_s: float


@dataclass(frozen=True)
class LineSpec:
    """An ordered sequence of stop visits starting at the line terminal.

    The segment of visit ``s`` is the trip from visit ``s-1`` to ``s``; the
    terminal visit carries a zero segment. Circular lines repeat the terminal
    as their last visit.
    """

    id: int
    visits: tuple[Visit, ...]
    fleet_size: int = 1
    circular: bool = False

    @property
    def terminal(self) -> int:
        return self.visits[0].stop

    @property
    def n_segments(self) -> int:
        return len(self.visits) - 1

    def segment_means(self) -> np.ndarray:
        return np.array([v.segment.mean_kwh for v in self.visits[1:]], dtype=float)

    def segment_maxima(self) -> np.ndarray:
        return np.array([v.segment.max_kwh for v in self.visits[1:]], dtype=float)

    def segment_devs(self) -> np.ndarray:
        return self.segment_maxima() - self.segment_means()

    def dwells(self) -> np.ndarray:
        return np.array([v.dwell_s for v in self.visits], dtype=float)


@dataclass(frozen=True)
class CostParams:
    station_cost: Mapping[ChargerType, float]
    battery_cost_per_kwh: float
    charger_power_kw: Mapping[ChargerType, float]
    soc_upper: float = 0.8
    soc_lower: float = 0.2

    @property
    def usable_fraction(self) -> float:
        return self.soc_upper - self.soc_lower

    def charge_kwh(self, charger: ChargerType, dwell_s: float) -> float:
        return self.charger_power_kw[charger] * dwell_s / 3600.0

    def replace(self, **changes) -> "CostParams":
        values = dict(
            station_cost=dict(self.station_cost),
            battery_cost_per_kwh=self.battery_cost_per_kwh,
            charger_power_kw=dict(self.charger_power_kw),
            soc_upper=self.soc_upper,
            soc_lower=self.soc_lower,
        )
        values.update(changes)
        return CostParams(**values)


def default_costs() -> CostParams:
    """Infrastructure and battery parameters of the Rotterdam study."""
    return CostParams(
        station_cost={ChargerType.STANDARD: 20_000.0, ChargerType.FAST_FEEDING: 80_000.0},
        battery_cost_per_kwh=1750.0,
        charger_power_kw={ChargerType.STANDARD: 100.0, ChargerType.FAST_FEEDING: 600.0},
        soc_upper=0.8,
        soc_lower=0.2,
    )


@dataclass(frozen=True)
class Stop:
    id: int
    x: Optional[float] = None
    y: Optional[float] = None


@dataclass(frozen=True)
class NetworkInstance:
    lines: tuple[LineSpec, ...]
    stops: tuple[Stop, ...]
    costs: CostParams
    excluded_stops: frozenset[int] = frozenset()
    metadata: Mapping = field(default_factory=dict)

    def line(self, line_id: int) -> LineSpec:
        for line in self.lines:
            if line.id == line_id:
                return line
        raise KeyError(f"no line {line_id}")

    def with_costs(self, costs: CostParams) -> "NetworkInstance":
        return NetworkInstance(self.lines, self.stops, costs, self.excluded_stops, self.metadata)

    def with_fleet_size(self, fleet_size: int) -> "NetworkInstance":
        lines = tuple(
            LineSpec(l.id, l.visits, fleet_size, l.circular) for l in self.lines
        )
        return NetworkInstance(lines, self.stops, self.costs, self.excluded_stops, self.metadata)


def candidate_stops(inst: NetworkInstance) -> list[int]:
    """Stops that may receive a charger, ascending.

    A charger only matters where a bus dwells after leaving the terminal, so a
    stop qualifies if it is not excluded and some line visits it at a
    non-terminal position.
    """
    found = set()
    for line in inst.lines:
        for v in line.visits[1:]:
            found.add(v.stop)
    return sorted(found - set(inst.excluded_stops))


@dataclass(frozen=True)
class ChargingDesign:
    placement: Mapping[int, ChargerType]
    capacity_kwh: Mapping[int, float]
    objective_eur: float
    station_cost_eur: float
    battery_cost_eur: float

    def n_stations(self) -> int:
        return len(self.placement)


def design_costs(
    inst: NetworkInstance,
    placement: Mapping[int, ChargerType],
    capacity_kwh: Mapping[int, float],
) -> ChargingDesign:
    """Price a placement and capacities with the network's cost parameters."""
    costs = inst.costs
    station = sum(costs.station_cost[t] for t in placement.values())
    battery = sum(
        costs.battery_cost_per_kwh * line.fleet_size * capacity_kwh[line.id]
        for line in inst.lines
    )
    return ChargingDesign(
        placement=dict(sorted(placement.items())),
        capacity_kwh=dict(sorted(capacity_kwh.items())),
        objective_eur=station + battery,
        station_cost_eur=station,
        battery_cost_eur=battery,
    )


def validate_network(inst: NetworkInstance) -> list[str]:
    """Return one message per broken invariant; empty means valid."""
    problems = []
    costs = inst.costs
    if not 0.0 <= costs.soc_lower < costs.soc_upper <= 1.0:
        problems.append(
            f"costs: need 0 <= soc_lower < soc_upper <= 1, got "
            f"soc_lower={costs.soc_lower}, soc_upper={costs.soc_upper}"
        )
    if costs.battery_cost_per_kwh <= 0:
        problems.append("costs: battery_cost_per_kwh must be > 0")
    for t in CHARGER_TYPES:
        if costs.station_cost.get(t, 0) <= 0:
            problems.append(f"costs: station_cost[{t.value}] must be > 0")
        if costs.charger_power_kw.get(t, 0) <= 0:
            problems.append(f"costs: charger_power_kw[{t.value}] must be > 0")

    stop_ids = [s.id for s in inst.stops]
    if sorted(stop_ids) != list(range(len(stop_ids))):
        problems.append("stops: ids must be dense and 0-based")
    known = set(stop_ids)
    for s in sorted(set(inst.excluded_stops) - known):
        problems.append(f"excluded_stops: unknown stop {s}")

    line_ids = [l.id for l in inst.lines]
    if sorted(line_ids) != list(range(len(line_ids))):
        problems.append("lines: ids must be dense and 0-based")
    for line in inst.lines:
        name = f"line {line.id}"
        if len(line.visits) < 2:
            problems.append(f"{name}: needs at least 2 visits")
            continue
        if line.fleet_size < 1:
            problems.append(f"{name}: fleet_size must be >= 1")
        first = line.visits[0]
        if first.segment.mean_kwh != 0 or first.segment.max_kwh != 0:
            problems.append(f"{name}: first visit must be the terminal with a zero segment")
        if line.circular and line.visits[-1].stop != first.stop:
            problems.append(f"{name}: circular line must end at its terminal")
        for i, v in enumerate(line.visits):
            if v.stop not in known:
                problems.append(f"{name}: visit {i} references unknown stop {v.stop}")
            if not v.dwell_s > 0:
                problems.append(f"{name}: visit {i} dwell_s must be > 0")
            if v.segment.mean_kwh < 0:
                problems.append(f"{name}: visit {i} mean_kwh must be >= 0")
            if v.segment.max_kwh < v.segment.mean_kwh:
                problems.append(f"{name}: visit {i} max_kwh below mean_kwh")
    return problems


def prefix_mean_consumption(line: LineSpec) -> np.ndarray:
    """Cumulative mean consumption from the terminal, one entry per visit."""
    return np.concatenate([[0.0], np.cumsum(line.segment_means())])


def visit_charge_kwh(
    line: LineSpec, placement: Mapping[int, ChargerType], costs: CostParams
) -> np.ndarray:
    """Charge received at each visit; the terminal visit receives none.

    Buses leave the terminal at the upper state-of-charge limit, so any
    terminal charger is irrelevant to the trip.
    """
    out = np.zeros(len(line.visits))
    for i, v in enumerate(line.visits[1:], start=1):
        t = placement.get(v.stop)
        if t is not None:
            out[i] = costs.charge_kwh(t, v.dwell_s)
    return out


@dataclass(frozen=True)
class EnergyTrajectory:
    """Arrival and departure levels per visit; arrival at the terminal is NaN."""

    arrival_kwh: np.ndarray
    departure_kwh: np.ndarray


def mean_trajectory(
    design: ChargingDesign, line: LineSpec, costs: CostParams
) -> EnergyTrajectory:
    if line.id not in design.capacity_kwh:
        raise KeyError(f"design has no capacity for line {line.id}")
    full = costs.soc_upper * design.capacity_kwh[line.id]
    gain = visit_charge_kwh(line, design.placement, costs)
    n = len(line.visits)
    arrival = np.full(n, np.nan)
    departure = np.empty(n)
    departure[0] = full
    for s in range(1, n):
        arrival[s] = departure[s - 1] - line.visits[s].segment.mean_kwh
        departure[s] = min(full, arrival[s] + gain[s]) if gain[s] > 0 else arrival[s]
    return EnergyTrajectory(arrival, departure)


# --------------------------------------------------------------------------
# JSON interchange
# --------------------------------------------------------------------------

def _num(x: float):
    return int(x) if float(x).is_integer() else float(x)


def network_to_dict(inst: NetworkInstance) -> dict:
    stops = []
    for s in inst.stops:
        d = {"id": s.id}
        if s.x is not None:
            d["x"] = s.x
        if s.y is not None:
            d["y"] = s.y
        stops.append(d)
    lines = [
        {
            "id": l.id,
            "fleet_size": l.fleet_size,
            "circular": l.circular,
            "visits": [
                {
                    "stop": v.stop,
                    "mean_kwh": v.segment.mean_kwh,
                    "max_kwh": v.segment.max_kwh,
                    "dwell_s": v.dwell_s,
                }
                for v in l.visits
            ],
        }
        for l in inst.lines
    ]
    c = inst.costs
    out = {
        "stops": stops,
        "lines": lines,
        "costs": {
            "station_cost": {t.value: _num(c.station_cost[t]) for t in CHARGER_TYPES},
            "battery_cost_per_kwh": _num(c.battery_cost_per_kwh),
            "power_kw": {t.value: _num(c.charger_power_kw[t]) for t in CHARGER_TYPES},
            "soc_upper": c.soc_upper,
            "soc_lower": c.soc_lower,
        },
        "excluded_stops": sorted(inst.excluded_stops),
    }
    if inst.metadata:
        out["metadata"] = dict(inst.metadata)
    return out


def network_from_dict(data: dict) -> NetworkInstance:
    stops = tuple(Stop(int(s["id"]), s.get("x"), s.get("y")) for s in data["stops"])
    lines = []
    for l in data["lines"]:
        visits = tuple(
            Visit(
                int(v["stop"]),
                SegmentStat(float(v["mean_kwh"]), float(v["max_kwh"])),
                float(v["dwell_s"]),
            )
            for v in l["visits"]
        )
        lines.append(LineSpec(int(l["id"]), visits, int(l["fleet_size"]), bool(l["circular"])))
    c = data["costs"]
    costs = CostParams(
        station_cost={t: float(c["station_cost"][t.value]) for t in CHARGER_TYPES},
        battery_cost_per_kwh=float(c["battery_cost_per_kwh"]),
        charger_power_kw={t: float(c["power_kw"][t.value]) for t in CHARGER_TYPES},
        soc_upper=float(c["soc_upper"]),
        soc_lower=float(c["soc_lower"]),
    )
    return NetworkInstance(
        tuple(lines),
        stops,
        costs,
        frozenset(int(s) for s in data.get("excluded_stops", [])),
        data.get("metadata", {}),
    )


def design_to_dict(design: ChargingDesign) -> dict:
    return {
        "placement": {str(s): t.value for s, t in sorted(design.placement.items())},
        "capacity_kwh": {str(k): v for k, v in sorted(design.capacity_kwh.items())},
        "objective_eur": design.objective_eur,
        "station_cost_eur": design.station_cost_eur,
        "battery_cost_eur": design.battery_cost_eur,
    }


def design_from_dict(data: dict) -> ChargingDesign:
    return ChargingDesign(
        placement={int(s): ChargerType(t) for s, t in data["placement"].items()},
        capacity_kwh={int(k): float(v) for k, v in data["capacity_kwh"].items()},
        objective_eur=float(data["objective_eur"]),
        station_cost_eur=float(data["station_cost_eur"]),
        battery_cost_eur=float(data["battery_cost_eur"]),
    )


def dump_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def load_network(path) -> NetworkInstance:
    return network_from_dict(json.loads(Path(path).read_text()))


def save_network(inst: NetworkInstance, path) -> None:
    dump_json(network_to_dict(inst), path)


def load_design(path) -> ChargingDesign:
    return design_from_dict(json.loads(Path(path).read_text()))


def save_design(design: ChargingDesign, path, extra: Optional[dict] = None) -> None:
    d = design_to_dict(design)
    if extra:
        d.update(extra)
    dump_json(d, path)
