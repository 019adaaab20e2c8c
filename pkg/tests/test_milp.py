import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebus_cid.milp import (
    MilpError,
    MilpModel,
    Sense,
    SolutionParseError,
    SolveStatus,
    SolverFailure,
    TooManyBinaries,
    VarKind,
    VarRole,
    parse_lp_text,
    parse_solution_text,
    solve_bundled,
    solve_external,
    solve_lp,
    write_lp_text,
    write_solution_text,
)

try:
    import highspy  # noqa: F401
    HAVE_HIGHS = True
except ImportError:
    HAVE_HIGHS = False

PY = sys.executable


def single_var(lb=0.0, ub=10.0):
    m = MilpModel("one")
    x = m.add_var("x", lb=lb, ub=ub)
    return m, x


def knapsack():
    m = MilpModel("knap")
    a = m.add_var("a", kind=VarKind.BINARY)
    b = m.add_var("b", kind=VarKind.BINARY)
    m.set_objective([(a, -3), (b, -2)])
    m.add_constr([(a, 1), (b, 1)], Sense.LE, 1, "pick")
    return m


def test_bundled_single_constraint_lp():
    m, x = single_var()
    m.set_objective([(x, -1)])
    m.add_constr([(x, 1)], Sense.LE, 1, "cap")
    r = solve_bundled(m)
    assert r.status is SolveStatus.OPTIMAL
    assert r.values[x] == pytest.approx(1) and r.objective == pytest.approx(-1)


def test_bundled_dominated_rows():
    m, x = single_var(ub=math.inf)
    m.set_objective([(x, 1)])
    m.add_constr([(x, 1)], Sense.GE, 3, "r1")
    m.add_constr([(x, 1)], Sense.GE, 5, "r2")
    assert solve_bundled(m).objective == pytest.approx(5)


def test_bundled_knapsack():
    r = solve_bundled(knapsack())
    assert r.values.tolist() == [1, 0] and r.objective == pytest.approx(-3)
    assert r.gap == 0


def test_bundled_infeasible_and_unbounded():
    m, x = single_var(ub=1)
    m.add_constr([(x, 1)], Sense.GE, 2, "r")
    assert solve_bundled(m).status is SolveStatus.INFEASIBLE
    m, x = single_var(ub=math.inf)
    m.set_objective([(x, -1)])
    assert solve_bundled(m).status is SolveStatus.UNBOUNDED


def test_bundled_binary_limit():
    m = MilpModel()
    for i in range(5):
        m.add_var(f"b{i}", kind=VarKind.BINARY)
    with pytest.raises(TooManyBinaries):
        solve_bundled(m, max_binaries=4)


def test_bundled_time_limit_reports_status():
    r = solve_bundled(knapsack(), time_s=0.0)
    assert r.status is SolveStatus.TIME_LIMIT


def test_equality_rows():
    m = MilpModel()
    x = m.add_var("x", ub=10)
    y = m.add_var("y", ub=10)
    m.set_objective([(x, 1), (y, 2)])
    m.add_constr([(x, 1), (y, 1)], Sense.EQ, 4, "sum")
    m.add_constr([(x, 1)], Sense.LE, 3, "cap")
    r = solve_bundled(m)
    assert r.values.tolist() == pytest.approx([3, 1])


def test_model_rejects_bad_input():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(MilpError):
        m.add_var("x")
    with pytest.raises(MilpError):
        m.add_var("")
    with pytest.raises(MilpError):
        m.add_constr([(3, 1.0)], Sense.LE, 1, "bad")


def test_rows_merge_duplicate_ids():
    m = MilpModel()
    x = m.add_var("x")
    m.add_constr([(x, 1.0), (x, 2.0)], Sense.LE, 1, "r")
    assert m.constraints[0].coeffs == ((x, 3.0),)


# --------------------------------------------------------------------------
# LP text
# --------------------------------------------------------------------------

def test_lp_text_empty_objective_and_row_label():
    m, x = single_var()
    m.add_constr([(x, 1)], Sense.LE, 1, "cap")
    text = write_lp_text(m)
    assert " cap: 1 x <= 1" in text
    assert "Minimize" in text and "End" in text


def test_lp_text_fixpoint():
    m = knapsack()
    z = m.add_var("z_0", VarRole.CAPACITY, ub=13.3333333333333)
    m.add_constr([(z, 0.6), (0, -1 / 3)], Sense.GE, 1.1, "level_0_1")
    first = write_lp_text(m)
    second = write_lp_text(parse_lp_text(first))
    assert first == second
    assert parse_lp_text(first).variables[z].role is VarRole.CAPACITY


def test_lp_text_declares_binaries():
    text = write_lp_text(knapsack())
    assert text.split("Binaries\n")[1].startswith(" a\n b\n")


def test_lp_text_rejects_unnamed_variable():
    m = MilpModel()
    m.add_var("x")
    m.variables[0] = m.variables[0].__class__("", VarRole.AUX, VarKind.CONTINUOUS, 0, 1)
    with pytest.raises(MilpError):
        write_lp_text(m)


def test_solution_round_trip():
    m = knapsack()
    r = solve_bundled(m)
    back = parse_solution_text(write_solution_text(m, r), m)
    assert back.status is SolveStatus.OPTIMAL
    assert back.values.tolist() == r.values.tolist() and back.objective == r.objective


def test_solution_infeasible_status():
    assert parse_solution_text("=status= Infeasible\n", knapsack()).status is SolveStatus.INFEASIBLE


def test_solution_parse_error_names_line():
    with pytest.raises(SolutionParseError) as err:
        parse_solution_text("=status= Optimal\na 1\nb one\n", knapsack())
    assert err.value.line_no == 3


def test_solution_missing_variables():
    with pytest.raises(SolutionParseError):
        parse_solution_text("=status= Optimal\n=obj= -3\na 1\n", knapsack())


# --------------------------------------------------------------------------
# external bridge
# --------------------------------------------------------------------------

def _fake_solver(tmp_path, body):
    script = tmp_path / "fake.py"
    script.write_text("import sys\nopen(sys.argv[2], 'w').write(" + repr(body) + ")\n")
    return f"{PY} {script} {{lp}} {{sol}}"


def test_external_parses_solution(tmp_path):
    cmd = _fake_solver(tmp_path, "=status= Optimal\n=obj= -3\na 1\nb 0\n")
    r = solve_external(knapsack(), cmd)
    assert r.status is SolveStatus.OPTIMAL and r.values.tolist() == [1, 0]


def test_external_reports_infeasible(tmp_path):
    cmd = _fake_solver(tmp_path, "=status= Infeasible\n")
    assert solve_external(knapsack(), cmd).status is SolveStatus.INFEASIBLE


def test_external_malformed_solution(tmp_path):
    cmd = _fake_solver(tmp_path, "=status= Optimal\na 1 2\n")
    with pytest.raises(SolutionParseError) as err:
        solve_external(knapsack(), cmd)
    assert err.value.line_no == 2


def test_external_process_failure(tmp_path):
    with pytest.raises(SolverFailure):
        solve_external(knapsack(), f"{PY} -c 'import sys; sys.exit(3)' {{lp}} {{sol}}")
    with pytest.raises(SolverFailure):
        solve_external(knapsack(), f"{PY} -c 'pass' {{lp}} {{sol}}")
    with pytest.raises(SolverFailure):
        solve_external(knapsack(), "true")


@pytest.mark.skipif(not HAVE_HIGHS, reason="highspy not installed")
def test_highs_adapter_matches_bundled():
    m = knapsack()
    r = solve_external(m, time_s=10)
    assert r.status is SolveStatus.OPTIMAL
    assert r.objective == pytest.approx(solve_bundled(m).objective, rel=1e-5)


# --------------------------------------------------------------------------
# properties
# --------------------------------------------------------------------------

@st.composite
def feasible_lp(draw):
    n = draw(st.integers(1, 5))
    m_rows = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    ub = rng.integers(1, 10, n).astype(float)
    x0 = rng.uniform(0, 1, n) * ub
    A = rng.integers(-5, 6, (m_rows, n)).astype(float)
    senses = [Sense(s) for s in rng.choice(["<=", ">=", "="], m_rows, p=[0.45, 0.45, 0.1])]
    b = A @ x0
    slack = rng.uniform(0, 2, m_rows)
    b = np.where([s is Sense.LE for s in senses], b + slack, b)
    b = np.where([s is Sense.GE for s in senses], b - slack, b)
    c = rng.integers(-5, 6, n).astype(float)
    return c, A, senses, b, np.zeros(n), ub


@settings(max_examples=80, deadline=None)
@given(feasible_lp())
def test_simplex_feasible_and_dual_feasible(lp):
    c, A, senses, b, lb, ub = lp
    res = solve_lp(c, A, senses, b, lb, ub)
    assert res.status == "optimal"
    x = res.x
    lhs = A @ x
    for s, l, r in zip(senses, lhs, b):
        if s is Sense.LE:
            assert l <= r + 1e-7
        elif s is Sense.GE:
            assert l >= r - 1e-7
        else:
            assert abs(l - r) <= 1e-7
    assert np.all(x >= lb - 1e-7) and np.all(x <= ub + 1e-7)
    # the reported basis is primal and dual feasible
    assert np.all(res.basic_values >= -1e-7)
    assert np.all(res.reduced_costs >= -1e-7)
    basic = set(res.basis)
    assert all(abs(res.reduced_costs[j]) <= 1e-7 for j in basic if j < res.reduced_costs.size)


@st.composite
def small_milp(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    nb = draw(st.integers(1, 10))
    nc = draw(st.integers(0, 3))
    m = MilpModel("rand")
    for i in range(nb):
        m.add_var(f"b{i}", kind=VarKind.BINARY)
    for i in range(nc):
        m.add_var(f"c{i}", ub=float(rng.integers(1, 6)))
    n = nb + nc
    for r in range(int(rng.integers(1, 5))):
        coeffs = [(j, float(v)) for j, v in enumerate(rng.integers(-4, 5, n)) if v]
        sense = Sense.LE if rng.random() < 0.6 else Sense.GE
        rhs = float(rng.integers(-2, 6))
        m.add_constr(coeffs, sense, rhs, f"r{r}")
    m.set_objective((j, float(v)) for j, v in enumerate(rng.integers(-6, 7, n)))
    return m


@settings(max_examples=60, deadline=None)
@given(small_milp())
def test_branching_matches_exhaustive(m):
    pruned = solve_bundled(m)
    full = solve_bundled(m, exhaustive=True)
    assert pruned.status is full.status
    if full.status is SolveStatus.OPTIMAL:
        assert abs(pruned.objective - full.objective) <= 1e-9 * max(1.0, abs(full.objective))
        assert m.max_violation(pruned.values) <= 1e-7
