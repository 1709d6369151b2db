"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Every check compares the implementation against an independent route (the
monitor, a closed form, exhaustive enumeration, or an external solver) and is
seeded, so the printed numbers are reproducible.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from helpers import (
    enumerate_milp,
    lasso_ok,
    min_abs_predicate,
    pinned,
    rand_formula,
    rand_milp,
    rand_preds,
    rand_run,
    report,
)
from stlmpc.benchmarks import DT, N as BENCH_N, hvac_toy, reference_formulas, reference_system
from stlmpc.encoder import EncodingParams, count_variables, encode, encode_snn_lp
from stlmpc.formula import And, Globally, Interval, Not, Predicate, horizon_steps, is_bounded, is_snn
from stlmpc.milp import Solution, SolverConfig, Status, export_lp, read_lp, solve
from stlmpc.semantics import robustness, satisfies
from stlmpc.synthesis import (
    L1InputNorm,
    MaxRobustness,
    apply_cost,
    check_run,
    exact_predictor,
    mpc,
    open_loop,
)
from stlmpc.trace import AffineSystem, Run, TrivialSystem

pytestmark = pytest.mark.slow

# lasso structure checks gathered across the acceptance tests (criterion 7)
LASSO_LOG: list[tuple[bool, str]] = []

PRED_EXCLUSION = 1e-3   # pairs with a predicate this close to 0 are regenerated (criterion 1)


def _pinned_pairs(seed: int, count: int):
    """Seeded (formula, run) pairs: depth <= 3, |P| <= 3, N <= 12, finite and lasso alternating."""
    rng = np.random.default_rng(seed)
    made = 0
    while made < count:
        lasso = made % 2 == 1
        N = int(rng.integers(2, 13))
        preds = rand_preds(rng, 2, int(rng.integers(1, 4)))
        phi = rand_formula(rng, 3, preds, unbounded=lasso)
        if not lasso and (not is_bounded(phi) or horizon_steps(phi, 1.0) > N):
            continue
        run = rand_run(rng, 2, N, lasso)
        yield phi, run
        made += 1


SYS2 = TrivialSystem(2, 1.0, ((-3.0, 3.0),) * 2)


def test_c1_boolean_equivalence():
    t0 = time.perf_counter()
    total = mismatches = skipped = 0
    for phi, run in _pinned_pairs(101, 560):
        if min_abs_predicate(run, phi) < PRED_EXCLUSION:
            skipped += 1
            continue
        truth = satisfies(run, phi, 0)
        art, sol = pinned(SYS2, phi, run, "bool")
        feasible = sol.status == Status.OPTIMAL
        total += 1
        mismatches += feasible != truth
        if feasible and art.loop is not None:
            LASSO_LOG.append(lasso_ok(art, sol))
    elapsed = time.perf_counter() - t0
    ok = total >= 500 and mismatches == 0 and elapsed < 300
    report("C1 boolean encoder == monitor", ok,
           f"{total - mismatches}/{total} pairs agree ({skipped} near-zero predicates regenerated), {elapsed:.1f}s")
    assert ok


def test_c2_robust_equality():
    total = 0
    worst = 0.0
    failures = 0
    for phi, run in _pinned_pairs(202, 320):
        rho = robustness(run, phi, 0)
        art, sol = pinned(SYS2, phi, run, "robust", root_constraint=False)
        total += 1
        if not sol.ok:
            failures += 1
            continue
        err = abs(sol[art.root] - rho)
        worst = max(worst, err)
        failures += err > 1e-6
        if art.loop is not None:
            LASSO_LOG.append(lasso_ok(art, sol))
    ok = total >= 300 and failures == 0
    report("C2 robust encoder == monitor", ok,
           f"{total - failures}/{total} pairs within 1e-6 (worst |diff| {worst:.2e}, no exclusions)")
    assert ok


def _external(art, time_limit: float = 300.0):
    """Export the model as an LP file, read it back and solve it with HiGHS."""
    text = export_lp(art.model)
    other = read_lp(text)
    sol = solve(other, SolverConfig(backend="highs", time_limit=time_limit))
    if sol.assignment is None:
        return sol.status, None
    index = {v.name: v.id for v in other.variables}
    x = np.array([sol[index[v.name]] for v in art.model.variables])
    return sol.status, art.decode(Solution(sol.status, x, sol.objective_value))


def test_c3_reference_benchmarks():
    sysm = reference_system()
    lines = []
    ok = True
    for name, phi in reference_formulas().items():
        diag_b = open_loop(sysm, None, None, BENCH_N, phi, L1InputNorm(),
                           EncodingParams(N=BENCH_N, semantics="bool")).diagnostics
        budget = SolverConfig() if name in ("phi1", "phi2") else SolverConfig(node_limit=200)
        res_r = open_loop(sysm, None, None, BENCH_N, phi, L1InputNorm(),
                          EncodingParams(N=BENCH_N, semantics="robust", target=0.1), solver=budget)
        diag_r = res_r.diagnostics
        more = diag_r["constraints"] > diag_b["constraints"]
        good = diag_b["verified"] and diag_r["verified"] and diag_r["monitor_robustness"] >= 0.1 - 1e-6 and more
        line = (f"{name}: bool cost {diag_b['objective']:.4f} ({diag_b['constraints']} rows), "
                f"robust cost {diag_r['objective']:.4f} rho {diag_r['monitor_robustness']:.4f} "
                f"({diag_r['constraints']} rows, {'optimal' if diag_r['proven_optimal'] else 'budget'})")
        if name == "phi1":
            good &= diag_r["proven_optimal"] and abs(diag_r["objective"] - 1.0) <= 1e-6
        if name == "phi4":
            art = encode(sysm, phi, EncodingParams(N=BENCH_N, semantics="robust", target=0.1))
            apply_cost(art, L1InputNorm())
            status, run = _external(art)
            ext_ok, ext_rho = check_run(run, phi, "robust", 0.1) if run is not None else (False, math.nan)
            good &= status == Status.OPTIMAL and ext_ok
            line += f"; exported LP via HiGHS {status.value} rho {ext_rho:.4f}"
        ok &= good
        lines.append(line)
        print(line)
    report("C3 reference formulas phi1-phi4", ok, " | ".join(lines))
    assert ok


def _r2(ns, counts) -> float:
    ns, counts = np.asarray(ns, float), np.asarray(counts, float)
    A = np.column_stack([ns, np.ones_like(ns)])
    coef, *_ = np.linalg.lstsq(A, counts, rcond=None)
    ss = float(((counts - counts.mean()) ** 2).sum())
    return 1.0 if ss == 0 else 1.0 - float(((A @ coef - counts) ** 2).sum()) / ss


def test_c4_linear_binary_counts():
    ns = [10, 20, 30, 40]
    cases = [(name, phi, 0.1) for name, phi in reference_formulas().items()]
    rng = np.random.default_rng(404)
    while len(cases) < 14:
        phi = rand_formula(rng, 3, rand_preds(rng, 2, 3))
        if is_bounded(phi) and horizon_steps(phi, 1.0) <= min(ns):
            cases.append((f"rand{len(cases) - 4}", phi, 1.0))
    worst = 1.0
    for name, phi, dt in cases:
        for sem in ("bool", "robust"):
            for mode in ("finite", "lasso"):
                counts = [count_variables(phi, n, sem, dt, mode).binaries for n in ns]
                worst = min(worst, _r2(ns, counts))
    ok = worst >= 0.999
    report("C4 binaries linear in N", ok,
           f"min R^2 {worst:.6f} over {len(cases)} formulas x 2 semantics x 2 modes, N in {ns}")
    assert ok


def _snn(f):
    """Map a random formula into the SNN fragment: keep negations only directly on atoms."""
    if isinstance(f, Not):
        a = f.arg
        if isinstance(a, Predicate):
            return f
        return _snn(a.arg) if isinstance(a, Not) else _snn(a)
    if isinstance(f, And):
        return And(*[_snn(a) for a in f.args])
    if isinstance(f, Globally):
        return Globally(f.interval, _snn(f.arg))
    return f


def test_c5_snn_lp():
    rng = np.random.default_rng(505)
    sysm = AffineSystem(A=[[0.9, 0.1], [0.0, 0.95]], B=[[1.0, 0.0], [0.0, 1.0]], E=np.zeros((2, 0)),
                        c=[0.0, 0.0], x_bounds=[(-4.0, 4.0)] * 2, u_bounds=[(-1.0, 1.0)] * 2, dt=1.0)
    worst, binaries = 0.0, 0
    for _ in range(50):
        phi = _snn(rand_formula(rng, 3, rand_preds(rng, 2, 3), ops="nag", maxsteps=4))
        assert is_snn(phi)
        N = max(1, horizon_steps(phi, 1.0) + int(rng.integers(0, 3)))
        x0 = rng.uniform(-1, 1, 2)
        params = EncodingParams(N=N, semantics="robust", root_constraint=False)
        lp = encode_snn_lp(sysm, phi, params, x0=x0)
        apply_cost(lp, MaxRobustness())
        gadget = encode(sysm, phi, params, x0=x0)
        apply_cost(gadget, MaxRobustness())
        s_lp, s_g = solve(lp.model), solve(gadget.model)
        binaries += lp.model.num_binaries
        worst = max(worst, abs(s_lp[lp.root] - s_g[gadget.root]))
    ok = binaries == 0 and worst <= 1e-6
    report("C5 SNN as LP", ok, f"50 formulas, {binaries} binaries, worst |LP - gadget| {worst:.2e}")
    assert ok


def _random_mpc_instances(seed: int, count: int):
    rng = np.random.default_rng(seed)
    made = 0
    while made < count:
        n = int(rng.integers(1, 3))
        sysm = AffineSystem(A=np.diag(rng.uniform(0.6, 1.0, n)), B=np.eye(n), E=np.zeros((n, 0)),
                            c=np.zeros(n), x_bounds=[(-5.0, 5.0)] * n, u_bounds=[(-1.0, 1.0)] * n, dt=1.0)
        preds = rand_preds(rng, n, 2)
        phi = Globally(Interval(0, int(rng.integers(0, 3))), rand_formula(rng, 1, preds, ops="agfo", maxsteps=2))
        h = horizon_steps(phi, 1.0)
        if h > 4:
            continue
        # prefer an initial state that satisfies phi when held constant
        for _ in range(5):
            x0 = rng.uniform(-2, 2, n)
            if satisfies(Run(np.tile(x0, (h + 1, 1)), None, None, 1.0), phi):
                break
        made += 1
        yield sysm, x0, phi


def test_c6_mpc_soundness():
    toy = hvac_toy(steps=40)
    res = mpc(toy.system, toy.x0, toy.phi_mpc, L1InputNorm(), exact_predictor(toy.disturbances, 2 * toy.H + 1),
              40, w_true=toy.disturbances, H=toy.H)
    hvac_ok = res.completed and not res.violations
    completed = aborted = violations = 0
    for sysm, x0, phi in _random_mpc_instances(606, 20):
        r = mpc(sysm, x0, phi, L1InputNorm(), None, 40)
        assert r.H <= 4
        if r.completed:
            completed += 1
            violations += len(r.violations)
            # independent re-check of the realized run at every offset k <= 40 - H
            violations += sum(not satisfies(r.run, phi, k) for k in range(40 - r.H + 1)) if not r.violations else 0
        else:
            aborted += 1
    ok = hvac_ok and violations == 0 and completed >= 10
    report("C6 MPC trace-level soundness", ok,
           f"HVAC {'completed' if res.completed else 'aborted'} with {len(res.violations)} violations "
           f"over {res.checked_offsets} offsets; random: {completed} completed, {aborted} aborted infeasible, "
           f"{violations} violations")
    assert ok


def test_c7_lasso_structure():
    rng = np.random.default_rng(707)
    sysm = TrivialSystem(2, 1.0, ((-3.0, 3.0),) * 2)
    solved = 0
    for _ in range(40):
        phi = rand_formula(rng, 2, rand_preds(rng, 2, 2), unbounded=True)
        N = int(rng.integers(3, 9))
        for sem in ("bool", "robust"):
            art = encode(sysm, phi, EncodingParams(N=N, mode="lasso", semantics=sem))
            apply_cost(art, L1InputNorm())
            # decode validity, not optimality, is checked here: any incumbent will do
            sol = solve(art.model, SolverConfig(node_limit=300))
            if sol.assignment is not None:
                solved += 1
                LASSO_LOG.append(lasso_ok(art, sol))
                run = art.decode(sol)
                LASSO_LOG.append((check_run(run, phi, sem)[0], "monitor on decoded lasso"))
    bad = [msg for good, msg in LASSO_LOG if not good]
    ok = not bad and solved > 0
    report("C7 lasso decode validity", ok,
           f"{len(LASSO_LOG) - len(bad)}/{len(LASSO_LOG)} lasso checks valid ({solved} free lasso syntheses)")
    assert ok, bad[:5]


def test_c8_bnb_vs_enumeration():
    rng = np.random.default_rng(808)
    worst, mismatches, nodes_checked, bound_violations = 0.0, 0, 0, 0
    statuses = {}
    for i in range(100):
        if i % 3 == 0:
            model = rand_milp(rng, int(rng.integers(9, 13)), 0, int(rng.integers(2, 8)))
        else:
            model = rand_milp(rng, int(rng.integers(1, 9)), int(rng.integers(0, 4)), int(rng.integers(2, 8)))
        status, value = enumerate_milp(model)
        statuses[status] = statuses.get(status, 0) + 1
        sol = solve(model, SolverConfig(record_nodes=True))
        if status == "optimal":
            if not sol.ok:
                mismatches += 1
                continue
            worst = max(worst, abs(sol.objective_value - value))
            mismatches += abs(sol.objective_value - value) > 1e-7
            # the node log is in the solver's internal form: minimisation, no constant
            best_min = (-1.0 if model.maximize else 1.0) * (value - model.objective_constant)
        else:
            mismatches += sol.status != Status.INFEASIBLE
            best_min = math.inf
        for rec in sol.stats.get("node_log", []):
            if rec.status != "optimal":
                continue
            nodes_checked += 1
            tol = 1e-7 * max(1.0, abs(rec.bound))
            # a child's relaxation bound never drops below its parent's, and never exceeds the optimum
            if rec.bound < rec.parent_bound - tol:
                bound_violations += 1
            if rec.bound > best_min + tol and rec.parent < 0:
                bound_violations += 1
    ok = mismatches == 0 and bound_violations == 0
    report("C8 branch-and-bound == enumeration", ok,
           f"100 models ({statuses}), {mismatches} mismatches, worst |diff| {worst:.2e}; "
           f"{nodes_checked} node bounds checked, {bound_violations} violations")
    assert ok
