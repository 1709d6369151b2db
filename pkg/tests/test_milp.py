import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from helpers import enumerate_milp, rand_milp
from stlmpc.encoder import EncodingParams, encode
from stlmpc.formula import And, Predicate
from stlmpc.milp import MilpModel, ModelError, SolverConfig, Status, export_lp, read_lp, solve, solve_relaxation
from stlmpc.milp import simplex as sx
from stlmpc.milp.propagate import Propagator
from stlmpc.trace import TrivialSystem

STATUS = {"optimal": Status.OPTIMAL, "infeasible": Status.INFEASIBLE, "unbounded": Status.UNBOUNDED}


# -- model container ---------------------------------------------------------


def test_model_validation():
    m = MilpModel()
    x = m.add_variable("continuous", 0, 1, "x")
    with pytest.raises(ModelError):
        m.add_variable("continuous", 0, 1, "x")
    with pytest.raises(ModelError):
        m.add_variable("binary", -1, 1, "b")
    with pytest.raises(ModelError):
        m.add_constraint({x: 1.0}, "<>", 1.0)
    with pytest.raises(ModelError):
        m.add_constraint({7: 1.0}, "<=", 1.0)
    with pytest.raises(ModelError):
        m.add_variable("continuous", 0, 1, "bad name")


def test_violation_and_copy():
    m = MilpModel()
    x = m.add_variable("continuous", 0, 2, "x")
    b = m.add_variable("binary", 0, 1, "b")
    m.add_constraint({x: 1.0, b: 1.0}, "<=", 2.0)
    assert m.violation(np.array([1.0, 1.0])) == (0.0, 0.0)
    rows, integ = m.violation(np.array([1.5, 0.9]))
    assert rows == pytest.approx(0.4) and integ == pytest.approx(0.1)
    c = m.copy()
    c.fix(x, 0.0)
    assert m.variables[x].upper == 2.0


# -- simplex -----------------------------------------------------------------


def _rand_lp(rng, n, m):
    A = np.round(rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.6), 2)
    x0 = rng.uniform(-1, 1, n)
    act = A @ x0
    kind = rng.integers(0, 3, m)
    row_lo = np.where(kind == 1, -np.inf, act - rng.uniform(0, 2, m))
    row_hi = np.where(kind == 0, np.inf, act + rng.uniform(0, 2, m))
    row_lo[kind == 2] = row_hi[kind == 2] = act[kind == 2]
    lo = np.where(rng.random(n) < 0.2, -np.inf, -2.0)
    hi = np.where(rng.random(n) < 0.2, np.inf, 2.0)
    if m and rng.random() < 0.2:  # make some instances infeasible
        row_lo[0], row_hi[0] = 1e3, np.inf
    return A, row_lo, row_hi, rng.normal(size=n), lo, hi


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), m=st.integers(0, 7))
def test_simplex_matches_linprog(seed, n, m):
    rng = np.random.default_rng(seed)
    A, row_lo, row_hi, c, lo, hi = _rand_lp(rng, n, m)
    res = sx.BoundedSimplex(A, row_lo, row_hi, c).solve(lo, hi)
    fh, fl = np.isfinite(row_hi), np.isfinite(row_lo)
    ref = linprog(c, A_ub=np.vstack([A[fh], -A[fl]]) if m else None,
                  b_ub=np.concatenate([row_hi[fh], -row_lo[fl]]) if m else None,
                  bounds=list(zip(lo, [None if math.isinf(h) else h for h in hi])), method="highs")
    if ref.status == 0:
        assert res.status == sx.OPTIMAL
        assert res.objective == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        assert np.all(A @ res.x <= row_hi + 1e-7) and np.all(A @ res.x >= row_lo - 1e-7)
        assert np.all(res.x >= lo - 1e-9) and np.all(res.x <= hi + 1e-9)
    elif ref.status == 2:
        assert res.status == sx.INFEASIBLE
    elif ref.status == 3:
        assert res.status == sx.UNBOUNDED


def test_simplex_warm_start_reuses_basis():
    rng = np.random.default_rng(5)
    A, row_lo, row_hi, c, lo, hi = _rand_lp(rng, 6, 5)
    lp = sx.BoundedSimplex(A, row_lo, row_hi, c)
    first = lp.solve(lo, hi)
    if first.status != sx.OPTIMAL:
        pytest.skip("instance not optimal")
    again = lp.solve(lo, hi, first.basis)
    assert again.iterations == 1  # one pricing pass, no pivots
    assert again.objective == pytest.approx(first.objective)


# -- branch and bound ----------------------------------------------------------


@given(seed=st.integers(0, 2**32 - 1))
def test_bnb_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    model = rand_milp(rng, int(rng.integers(1, 7)), int(rng.integers(0, 3)), int(rng.integers(1, 6)))
    status, value = enumerate_milp(model)
    sol = solve(model)
    assert sol.status == STATUS[status]
    if status == "optimal":
        assert sol.objective_value == pytest.approx(value, abs=1e-7 * (1 + abs(value)))
        x = sol.assignment
        _, _, _, _, _, _, is_bin = model.arrays()
        assert set(np.unique(x[is_bin])) <= {0.0, 1.0}  # exactly 0/1, not merely close
        rows, integ = model.violation(x)
        assert rows <= 1e-6 and integ == 0.0


@given(seed=st.integers(0, 2**32 - 1))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    model = rand_milp(rng, int(rng.integers(1, 9)), int(rng.integers(0, 3)), int(rng.integers(1, 6)))
    own = solve(model)
    ref = solve(model, SolverConfig(backend="highs"))
    if ref.status == Status.OPTIMAL:
        assert own.status == Status.OPTIMAL
        assert own.objective_value == pytest.approx(ref.objective_value, abs=1e-6)
    elif ref.status == Status.INFEASIBLE:
        # HiGHS reports "infeasible or unbounded" as status 2 as well
        assert own.status in (Status.INFEASIBLE, Status.UNBOUNDED)


def test_bnb_is_deterministic():
    model = rand_milp(np.random.default_rng(11), 12, 2, 8)
    cfg = SolverConfig(record_nodes=True, dive=False)
    a, b = solve(model, cfg), solve(model, cfg)
    assert a.status == b.status
    np.testing.assert_array_equal(a.assignment, b.assignment)
    assert a.stats["node_log"] == b.stats["node_log"]


def test_node_limit_reports_budget():
    rng = np.random.default_rng(2)
    model = MilpModel()
    xs = [model.add_variable("binary", 0, 1, f"b{i}") for i in range(25)]
    w = rng.integers(10, 60, 25)
    model.add_constraint({x: float(v) for x, v in zip(xs, w)}, "<=", float(w.sum() // 2) + 0.5)
    model.set_objective({x: float(v) + rng.random() for x, v in zip(xs, w)}, maximize=True)
    sol = solve(model, SolverConfig(node_limit=3, dive=False))
    assert sol.status == Status.ITERATION_LIMIT
    assert sol.stats["nodes"] <= 5


def test_relaxation_is_a_bound():
    model = rand_milp(np.random.default_rng(3), 8, 2, 5)
    relax = solve_relaxation(model)
    full = solve(model)
    if full.status == Status.OPTIMAL:
        better = relax.objective_value >= full.objective_value - 1e-9 if model.maximize \
            else relax.objective_value <= full.objective_value + 1e-9
        assert better


def test_unbounded_and_empty_models():
    m = MilpModel()
    x = m.add_variable("continuous", 0, math.inf, "x")
    b = m.add_variable("binary", 0, 1, "b")
    m.add_constraint({x: 1.0, b: -1.0}, ">=", 0.0)
    m.set_objective({x: 1.0}, maximize=True)
    assert solve(m).status == Status.UNBOUNDED
    empty = MilpModel()
    empty.set_objective({}, constant=4.0)
    sol = solve(empty)
    assert sol.status == Status.OPTIMAL and sol.objective_value == 4.0


# -- propagation ----------------------------------------------------------------


@given(seed=st.integers(0, 2**32 - 1))
def test_propagation_keeps_feasible_points(seed):
    """Every point satisfying a node's constraints survives the tightened bounds."""
    rng = np.random.default_rng(seed)
    n_bin, n_cont, m = int(rng.integers(1, 6)), int(rng.integers(1, 4)), int(rng.integers(1, 6))
    n = n_bin + n_cont
    is_bin = np.arange(n) < n_bin
    lo = np.where(is_bin, 0.0, -3.0)
    hi = np.where(is_bin, 1.0, 3.0)
    x = np.where(is_bin, rng.integers(0, 2, n), rng.uniform(-3, 3, n))
    A = np.round(rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.7), 2)
    act = A @ x
    row_lo = np.where(rng.random(m) < 0.5, act - rng.uniform(0, 0.5, m), -np.inf)
    row_hi = np.where(rng.random(m) < 0.5, act + rng.uniform(0, 0.5, m), np.inf)
    out = Propagator(A, row_lo, row_hi, is_bin).run(lo, hi)
    assert out is not None
    new_lo, new_hi = out
    assert np.all(new_lo <= x + 1e-9) and np.all(x <= new_hi + 1e-9)


def test_propagation_proves_infeasibility():
    A = np.array([[1.0, 1.0]])
    out = Propagator(A, np.array([3.0]), np.array([np.inf]), np.array([True, True])).run(
        np.zeros(2), np.ones(2))
    assert out is None


def test_propagation_resolves_tied_min_gadget():
    """``min(a, b)`` with ``a == b``: the selector is undecided but the value is pinned."""
    sys = TrivialSystem(2, 1.0, ((-3, 3),) * 2)
    phi = And(Predicate.gt("x1", 0.0), Predicate.gt("x2", 0.0))
    art = encode(sys, phi, EncodingParams(N=1, semantics="robust", root_constraint=False))
    for k in range(2):
        for i in range(2):
            art.model.fix(int(art.x[k, i]), 2.0)
    A, row_lo, row_hi, _, lo, hi, is_bin = art.model.arrays()
    new_lo, new_hi = Propagator(A, row_lo, row_hi, is_bin).run(lo, hi)
    assert new_lo[art.root] == pytest.approx(2.0, abs=1e-7)
    assert new_hi[art.root] == pytest.approx(2.0, abs=1e-7)


# -- LP export -----------------------------------------------------------------


@given(seed=st.integers(0, 2**32 - 1))
def test_lp_round_trip(seed):
    rng = np.random.default_rng(seed)
    model = rand_milp(rng, int(rng.integers(1, 6)), int(rng.integers(0, 3)), int(rng.integers(1, 5)))
    model.objective_constant = float(np.round(rng.normal(), 3))
    back = read_lp(export_lp(model))
    a, b = solve(model), solve(back)
    assert a.status == b.status
    if a.status == Status.OPTIMAL:
        assert b.objective_value == pytest.approx(a.objective_value, abs=1e-9)
    names = [v.name for v in model.variables]
    assert sorted(v.name for v in back.variables) == sorted(names)


def test_lp_file_is_readable_text(tmp_path):
    model = MilpModel()
    x = model.add_variable("continuous", -1, 4, "x")
    b = model.add_variable("binary", 0, 1, "b")
    model.add_constraint({x: 2.0, b: -1.0}, ">=", 0.5, "c1")
    model.set_objective({x: 1.0, b: 3.0}, constant=2.0)
    text = export_lp(model, tmp_path / "m.lp")
    assert (tmp_path / "m.lp").read_text() == text
    for section in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert section.lower() in text.lower()
