import json

import numpy as np
import pytest

from ebus_cid.network import (
    ZERO_SEGMENT,
    ChargerType,
    ChargingDesign,
    LineSpec,
    NetworkInstance,
    SegmentStat,
    Visit,
    candidate_stops,
    default_costs,
    design_costs,
    load_design,
    load_network,
    mean_trajectory,
    network_to_dict,
    prefix_mean_consumption,
    save_design,
    save_network,
    validate_network,
    visit_charge_kwh,
)

from helpers import line_instance


def test_valid_instance_has_no_violations():
    assert validate_network(line_instance([2, 2])) == []


def test_first_visit_must_be_terminal():
    inst = line_instance([2, 2])
    line = inst.lines[0]
    bad_first = Visit(0, SegmentStat(1.0, 1.0), 20.0)
    broken = LineSpec(0, (bad_first,) + line.visits[1:], 1, False)
    problems = validate_network(NetworkInstance((broken,), inst.stops, inst.costs))
    assert len(problems) == 1 and "line 0" in problems[0]


def test_soc_ordering_violation():
    inst = line_instance([2, 2])
    inst = inst.with_costs(inst.costs.replace(soc_lower=0.9, soc_upper=0.8))
    problems = validate_network(inst)
    assert len(problems) == 1 and problems[0].startswith("costs")


def test_other_rules_reported():
    inst = line_instance([2, 2], maxima=[1, 2])
    assert any("max_kwh below mean_kwh" in p for p in validate_network(inst))
    short = NetworkInstance((LineSpec(0, (Visit(0, ZERO_SEGMENT, 20.0),), 1),), inst.stops,
                            inst.costs)
    assert any("at least 2 visits" in p for p in validate_network(short))
    circ = LineSpec(0, inst.lines[0].visits, 1, circular=True)
    assert any("circular" in p for p in validate_network(
        NetworkInstance((circ,), inst.stops, inst.costs)))


def test_prefix_mean_consumption():
    assert prefix_mean_consumption(line_instance([2, 2]).lines[0]).tolist() == [0, 2, 4]
    line = line_instance([1.3 * 0.5, 1.3 * 1.0]).lines[0]
    np.testing.assert_allclose(prefix_mean_consumption(line), [0, 0.65, 1.95])


def test_trajectory_without_chargers():
    inst = line_instance([2, 2])
    design = design_costs(inst, {}, {0: 10.0})
    traj = mean_trajectory(design, inst.lines[0], inst.costs)
    np.testing.assert_allclose(traj.departure_kwh, [8, 6, 4])
    assert np.isnan(traj.arrival_kwh[0])
    np.testing.assert_allclose(traj.arrival_kwh[1:], [6, 4])


def test_fast_feeding_gain_is_capped():
    inst = line_instance([2, 2])
    assert inst.costs.charge_kwh(ChargerType.FAST_FEEDING, 20.0) == pytest.approx(10 / 3)
    design = design_costs(inst, {1: ChargerType.FAST_FEEDING}, {0: 10.0})
    traj = mean_trajectory(design, inst.lines[0], inst.costs)
    assert traj.departure_kwh[1] == pytest.approx(8.0)  # 6 + 10/3 capped at 8
    assert traj.arrival_kwh[2] == pytest.approx(6.0)


def test_zero_consumption_keeps_level():
    inst = line_instance([0, 0, 0])
    design = design_costs(inst, {}, {0: 5.0})
    traj = mean_trajectory(design, inst.lines[0], inst.costs)
    np.testing.assert_allclose(traj.departure_kwh, 4.0)


def test_trajectory_needs_line_capacity():
    inst = line_instance([2])
    design = ChargingDesign({}, {7: 1.0}, 0.0, 0.0, 0.0)
    with pytest.raises(KeyError):
        mean_trajectory(design, inst.lines[0], inst.costs)


def test_terminal_receives_no_charge():
    inst = line_instance([2, 2])
    gain = visit_charge_kwh(inst.lines[0], {0: ChargerType.STANDARD, 2: ChargerType.STANDARD},
                            inst.costs)
    assert gain[0] == 0 and gain[2] == pytest.approx(100 * 20 / 3600)


def test_candidates_skip_terminal_and_excluded():
    inst = line_instance([1, 1, 1], excluded={2})
    assert candidate_stops(inst) == [1, 3]


def test_design_costs_split():
    inst = line_instance([2, 2], fleet=3)
    d = design_costs(inst, {1: ChargerType.STANDARD}, {0: 2.0})
    assert d.station_cost_eur == 20_000
    assert d.battery_cost_eur == pytest.approx(1750 * 3 * 2.0)
    assert d.objective_eur == pytest.approx(d.station_cost_eur + d.battery_cost_eur, rel=1e-6)


def test_table_costs():
    c = default_costs()
    assert c.station_cost[ChargerType.STANDARD] == 20_000
    assert c.station_cost[ChargerType.FAST_FEEDING] == 80_000
    assert c.battery_cost_per_kwh == 1750
    assert c.charger_power_kw[ChargerType.FAST_FEEDING] == 600
    assert (c.soc_lower, c.soc_upper) == (0.2, 0.8)


def test_network_json_round_trip(tmp_path):
    inst = line_instance([2, 3], maxima=[4, 5], excluded={1})
    path = tmp_path / "net.json"
    save_network(inst, path)
    data = json.loads(path.read_text())
    assert set(data) == {"stops", "lines", "costs", "excluded_stops"}
    assert set(data["lines"][0]) == {"id", "fleet_size", "circular", "visits"}
    assert set(data["lines"][0]["visits"][0]) == {"stop", "mean_kwh", "max_kwh", "dwell_s"}
    assert set(data["costs"]) == {"station_cost", "battery_cost_per_kwh", "power_kw",
                                  "soc_upper", "soc_lower"}
    back = load_network(path)
    assert network_to_dict(back) == data


def test_design_json_round_trip(tmp_path):
    inst = line_instance([2, 2])
    d = design_costs(inst, {2: ChargerType.FAST_FEEDING}, {0: 3.5})
    save_design(d, tmp_path / "d.json", extra={"model": "cid"})
    back = load_design(tmp_path / "d.json")
    assert isinstance(back, ChargingDesign)
    assert back.placement == {2: ChargerType.FAST_FEEDING}
    assert back.capacity_kwh == {0: 3.5}
    assert back.objective_eur == pytest.approx(d.objective_eur)
