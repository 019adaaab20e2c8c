import csv

import numpy as np
import pytest

from ebus_cid.datagen import DistKind, DistSpec, generate_tiny_network, parse_dist
from ebus_cid.network import ChargerType, ChargingDesign, design_costs
from ebus_cid.oracle import enumerate_optimal_cid
from ebus_cid.simulation import (
    LIFETIME_CSV_HEADER,
    SIM_CSV_HEADER,
    ChargingMode,
    SimConfig,
    battery_lifetime,
    cycle_life,
    run_monte_carlo,
    trip_feasible,
)

from helpers import line_instance

# 1331 * (0.4**-1.825 + 0.2**-1.825), evaluated with mpmath at 40 digits
CYCLE_LIFE_REF = 32193.48609440970834689753342425110318681


@pytest.fixture
def toy():
    inst = line_instance([2, 2])
    return inst, enumerate_optimal_cid(inst)


def test_trip_feasible_examples(toy):
    inst, design = toy
    line = inst.lines[0]
    assert trip_feasible(design, line, [2, 2], inst.costs) == (True, None)
    assert trip_feasible(design, line, [2.5, 1.0], inst.costs) == (True, None)
    assert trip_feasible(design, line, [2.5, 2.5], inst.costs) == (False, 2)
    assert trip_feasible(design, line, [4.5, 0.0], inst.costs) == (False, 1)
    with pytest.raises(ValueError):
        trip_feasible(design, line, [1.0], inst.costs)


def test_charging_is_capped_at_upper_level():
    inst = line_instance([1, 3], dwell=3600)
    design = design_costs(inst, {1: ChargerType.STANDARD}, {0: 5.0})
    # full is 4; a huge charge at stop 1 cannot lift the level above 4
    assert trip_feasible(design, inst.lines[0], [1, 3], inst.costs) == (True, None)
    assert trip_feasible(design, inst.lines[0], [1, 3.01], inst.costs) == (False, 2)


def test_full_recharge_mode():
    inst = line_instance([3, 3], dwell=6)  # FF gives 1 kWh in 6 s
    design = design_costs(inst, {1: ChargerType.FAST_FEEDING}, {0: 10.0})
    line = inst.lines[0]
    # linear: 8 - 3 + 1 - 4.5 = 1.5 < 2; refilled: 8 - 4.5 = 3.5
    assert not trip_feasible(design, line, [3, 4.5], inst.costs)[0]
    assert trip_feasible(design, line, [3, 4.5], inst.costs, ChargingMode.FULL_RECHARGE_FF)[0]


def test_degenerate_draws_are_always_feasible():
    for seed in range(5):
        inst = generate_tiny_network(seed)
        design = enumerate_optimal_cid(inst)
        rep = run_monte_carlo(design, inst, SimConfig(DistSpec(DistKind.DEGENERATE), 10, 3))
        assert all(r == 100.0 for r in rep.line_rates.values())


def test_draws_above_mean_break_the_cid_design(toy):
    inst, design = toy
    rep = run_monte_carlo(design, inst, SimConfig(DistSpec(DistKind.DEGENERATE, scale=1.01), 10, 3))
    assert rep.line_rates[0] == 0.0
    assert rep.violations[0] == {2: 30}


def test_jobs_do_not_change_results():
    inst = generate_tiny_network(3)
    design = enumerate_optimal_cid(inst)
    cfg = SimConfig(parse_dist("tri:0,muhat,muhat"), 50, 12, seed=9)
    a = run_monte_carlo(design, inst, cfg)
    b = run_monte_carlo(design, inst, SimConfig(cfg.dist, 50, 12, seed=9, jobs=8))
    for k in a.run_rates:
        np.testing.assert_array_equal(a.run_rates[k], b.run_rates[k])
    assert a.violations == b.violations
    c = run_monte_carlo(design, inst, SimConfig(cfg.dist, 50, 12, seed=10))
    assert any(not np.array_equal(a.run_rates[k], c.run_rates[k]) for k in a.run_rates)


def test_feasibility_grows_with_capacity(toy):
    inst, design = toy
    cfg = SimConfig(parse_dist("uniform:0,muhat;scale=1.5"), 100, 20, seed=4)
    rates = []
    for extra in (0.0, 1.0, 2.0, 5.0):
        d = design_costs(inst, design.placement, {0: design.capacity_kwh[0] + extra})
        rates.append(run_monte_carlo(d, inst, cfg).line_rates[0])
    assert rates == sorted(rates)
    assert rates[-1] == 100.0


def test_wilson_interval_contains_rate(toy):
    inst, design = toy
    rep = run_monte_carlo(design, inst, SimConfig(parse_dist("uniform:0,muhat;scale=1.5"), 100, 10))
    lo, hi = rep.wilson_interval(0)
    assert lo < rep.line_rates[0] / 100 < hi
    assert rep.total_trials() == 1000


def test_missing_line_capacity_is_rejected(toy):
    inst, design = toy
    bad = ChargingDesign({}, {}, 0.0, 0.0, 0.0)
    with pytest.raises(KeyError):
        run_monte_carlo(bad, inst, SimConfig(DistSpec(DistKind.UNIFORM), 1, 1))
    with pytest.raises(KeyError):
        battery_lifetime(bad, inst)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(DistSpec(DistKind.UNIFORM), 0, 1)
    with pytest.raises(ValueError):
        SimConfig(DistSpec(DistKind.UNIFORM), 1, 1, jobs=0)


def test_csv_outputs(tmp_path, toy):
    inst, design = toy
    rep = run_monte_carlo(design, inst, SimConfig(DistSpec(DistKind.UNIFORM), 5, 2))
    rep.write_csv(tmp_path / "s.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == SIM_CSV_HEADER and rows[1][0] == "0"
    life = battery_lifetime(design, inst)
    life.write_csv(tmp_path / "l.csv")
    assert next(csv.reader(open(tmp_path / "l.csv"))) == LIFETIME_CSV_HEADER
    life.compare_to(life).write_csv(tmp_path / "c.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == LIFETIME_CSV_HEADER + ["relative_cost_diff_pct"]
    assert float(rows[1][-1]) == 0.0


def test_cycle_life_values():
    assert cycle_life([0.4], [0.2]) == pytest.approx(CYCLE_LIFE_REF, rel=1e-12)
    assert cycle_life([1.0], [1.0]) == 2662.0
    # zero fractions are skipped rather than raising
    assert cycle_life([1.0, 0.0], [1.0, 1e-12]) == 2662.0


def test_lifetime_single_stop():
    # z=10: leave at 8, arrive at 6 (dod 0.4), recharge 2 kWh back to 8 (charge 0.2)
    inst = line_instance([2.0], dwell=72.0)
    design = design_costs(inst, {1: ChargerType.STANDARD}, {0: 10.0})
    rep = battery_lifetime(design, inst)
    assert rep.metadata == {"g1": 1331.0, "g2": 1.825}
    got = rep.line(0)
    assert got.n_cycle == pytest.approx(CYCLE_LIFE_REF, rel=1e-3)
    assert got.cost_per_cycle_eur == pytest.approx(1750 * 10 / got.n_cycle)
    pricier = inst.with_costs(inst.costs.replace(battery_cost_per_kwh=3500.0))
    assert battery_lifetime(design, pricier).line(0).cost_per_cycle_eur == pytest.approx(
        2 * got.cost_per_cycle_eur)


def test_lifetime_rejects_zero_capacity():
    inst = line_instance([0.0])
    with pytest.raises(ValueError):
        battery_lifetime(design_costs(inst, {}, {0: 0.0}), inst)
