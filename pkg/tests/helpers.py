"""Shared generators and independent oracles for the test suite.

The oracles here are deliberately naive re-derivations:

* ``naive_rho`` / ``naive_sat`` evaluate STL straight from the definitions on
  an unrolled prefix of the run, checking window membership on real time
  stamps instead of through :func:`stlmpc.formula.to_steps`;
* ``enumerate_milp`` solves a mixed-binary model by enumerating every binary
  assignment and calling ``scipy.optimize.linprog`` on the continuous rest.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

from stlmpc.encoder import EncodingParams, encode
from stlmpc.formula import (
    INF,
    And,
    Eventually,
    Globally,
    Interval,
    Not,
    Or,
    Predicate,
    Until,
    predicates,
)
from stlmpc.milp import MilpModel, SolverConfig, solve
from stlmpc.trace import Run

# criterion id -> (passed, one-line detail); printed by conftest at the end of the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def report(key: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} {key}: {detail}")


# -- random formulas and runs ---------------------------------------------------


def rand_preds(rng, nx: int, k: int, nw: int = 0) -> list[Predicate]:
    out = []
    for _ in range(k):
        if nw and rng.random() < 0.3:
            c = np.zeros(nw)
            c[rng.integers(nw)] = rng.choice([-1, 1]) * rng.uniform(0.5, 2)
            out.append(Predicate((), (), tuple(c), float(rng.uniform(-1, 1))))
            continue
        c = np.zeros(nx)
        c[rng.integers(nx)] = rng.choice([-1, 1]) * rng.uniform(0.5, 2)
        if nx > 1 and rng.random() < 0.3:
            c[rng.integers(nx)] += rng.uniform(-1, 1)
        out.append(Predicate(tuple(c), (), (), float(rng.uniform(-1, 1))))
    return out


def rand_formula(rng, depth_: int, preds, *, unbounded: bool = False, maxsteps: int = 3, dt: float = 1.0,
                 ops: str = "nagfuo"):
    """Random formula over ``preds``; intervals are whole multiples of ``dt``."""
    if depth_ == 0 or rng.random() < 0.25:
        return preds[rng.integers(len(preds))]

    def iv():
        a = int(rng.integers(0, 3))
        b = a + int(rng.integers(0, maxsteps))
        if unbounded and rng.random() < 0.3:
            return Interval(a * dt, INF)
        return Interval(a * dt, b * dt)

    def sub():
        return rand_formula(rng, depth_ - 1, preds, unbounded=unbounded, maxsteps=maxsteps, dt=dt, ops=ops)

    op = ops[rng.integers(len(ops))]
    if op == "n":
        return Not(sub())
    if op == "a":
        return And(sub(), sub())
    if op == "o":
        return Or(sub(), sub())
    if op == "g":
        return Globally(iv(), sub())
    if op == "f":
        return Eventually(iv(), sub())
    return Until(iv(), sub(), sub())


def rand_run(rng, nx: int, N: int, lasso: bool, dt: float = 1.0, scale: float = 2.0) -> Run:
    states = rng.uniform(-scale, scale, (N + 1, nx))
    loop = None
    if lasso:
        loop = int(rng.integers(1, N + 1))
        states[N] = states[loop - 1]
    return Run(states, states, np.zeros((N + 1, 0)), dt, loop)


def min_abs_predicate(run: Run, phi) -> float:
    """Smallest ``|mu|`` over every predicate of ``phi`` and every stored sample."""
    vals = [abs(p.value(*run.signal(k))) for p in predicates(phi) for k in range(run.N + 1)]
    return min(vals) if vals else math.inf


def pinned(sys, phi, run: Run, semantics: str, *, root_constraint: bool | None = None,
           solver: SolverConfig | None = None):
    """Encode ``phi`` with the states (and loop) fixed to ``run``; return ``(artifacts, solution)``."""
    mode = "lasso" if run.loop_index else "finite"
    rc = (semantics == "bool") if root_constraint is None else root_constraint
    art = encode(sys, phi, EncodingParams(N=run.N, mode=mode, semantics=semantics, root_constraint=rc))
    model = art.model
    for k in range(run.N + 1):
        for i in range(sys.n):
            model.fix(int(art.x[k, i]), float(run.states[k, i]))
    if art.loop is not None:
        for j in range(1, run.N + 1):
            model.fix(int(art.loop[j - 1]), 1.0 if j == run.loop_index else 0.0)
    return art, solve(model, solver)


def lasso_ok(art, sol, tol: float = 1e-6) -> tuple[bool, str]:
    """Decoded (N,l)-loop structure: one loop binary set and ``x[l-1] == x[N]``."""
    lv = sol.values(art.loop)
    if abs(lv.sum() - 1.0) > 1e-6 or np.any(np.minimum(np.abs(lv), np.abs(lv - 1)) > 1e-6):
        return False, f"loop binaries {lv}"
    l = int(np.argmax(lv)) + 1
    xs = sol.values(art.x.ravel()).reshape(art.x.shape)
    gap = float(np.max(np.abs(xs[l - 1] - xs[art.N])))
    return gap <= tol, f"gap {gap:.3g}"


# -- naive STL evaluation ---------------------------------------------------------


def _naive(run: Run, phi, k: int, robust: bool):
    """Evaluate from the definitions on the infinite word of ``run``.

    Window membership is decided on time stamps ``i * dt`` (with a relative
    slack of 1e-7 samples); an unbounded window ``[a, inf)`` is replaced by
    ``[a, a + L]`` with ``L = N + period + 1``, long enough to revisit every
    stored sample of the loop.
    """
    dt = run.dt
    tail = run.N + run.period + 1 if run.loop_index is not None else None
    memo = {}

    def members(t, iv):
        lo_t = t * dt + iv.lo
        start = math.ceil(lo_t / dt - 1e-7)
        if math.isinf(iv.hi):
            return range(start, start + tail + 1)
        hi_t = t * dt + iv.hi
        return [i for i in range(start, math.floor(hi_t / dt + 1e-7) + 1)
                if lo_t - 1e-7 * dt <= i * dt <= hi_t + 1e-7 * dt]

    def ev(f, t):
        key = (id(f), t)
        if key in memo:
            return memo[key]
        if isinstance(f, Predicate):
            mu = f.value(*run.signal(t))
            out = mu if robust else mu > 0
        elif isinstance(f, Not):
            v = ev(f.arg, t)
            out = -v if robust else not v
        elif isinstance(f, And):
            vals = [ev(a, t) for a in f.args]
            out = min(vals) if robust else all(vals)
        elif isinstance(f, Or):
            vals = [ev(a, t) for a in f.args]
            out = max(vals) if robust else any(vals)
        elif isinstance(f, Globally):
            vals = [ev(f.arg, i) for i in members(t, f.interval)]
            out = min(vals, default=math.inf) if robust else all(vals)
        elif isinstance(f, Eventually):
            vals = [ev(f.arg, i) for i in members(t, f.interval)]
            out = max(vals, default=-math.inf) if robust else any(vals)
        elif isinstance(f, Until):
            vals = []
            for i in members(t, f.interval):
                left = [ev(f.left, j) for j in range(t, i + 1)]
                if robust:
                    vals.append(min(ev(f.right, i), min(left)))
                else:
                    vals.append(ev(f.right, i) and all(left))
            out = max(vals, default=-math.inf) if robust else any(vals)
        else:
            raise TypeError(f)
        memo[key] = out
        return out

    return ev(phi, k)


def naive_rho(run: Run, phi, k: int = 0) -> float:
    """Robustness straight from the definitions."""
    return float(_naive(run, phi, k, True))


def naive_sat(run: Run, phi, k: int = 0) -> bool:
    """Boolean satisfaction straight from the definitions (``mu > 0`` for atoms)."""
    return bool(_naive(run, phi, k, False))


# -- MILP oracles -------------------------------------------------------------


def rand_milp(rng, n_bin: int, n_cont: int, m: int) -> MilpModel:
    model = MilpModel()
    ids = [model.add_variable("binary", 0, 1, f"b{i}") for i in range(n_bin)]
    for i in range(n_cont):
        lo = float(rng.choice([-5.0, 0.0, -2.0]))
        ids.append(model.add_variable("continuous", lo, lo + float(rng.uniform(1, 8)), f"c{i}"))
    for r in range(m):
        k = int(rng.integers(1, min(len(ids), 5) + 1))
        vs = rng.choice(len(ids), size=k, replace=False)
        expr = {int(ids[v]): float(np.round(rng.normal() * 3, 2)) for v in vs}
        sense = str(rng.choice(["<=", ">=", "="], p=[0.45, 0.45, 0.1]))
        act = sum(c * (0.5 if v < n_bin else 0.0) for v, c in expr.items())
        rhs = float(np.round(act + rng.uniform(-2, 3) * (1 if sense == "<=" else -1), 2))
        model.add_constraint(expr, sense, rhs, f"r{r}")
    obj = {int(v): float(np.round(rng.normal() * 4, 2)) for v in ids}
    model.set_objective(obj, maximize=bool(rng.random() < 0.5))
    return model


def enumerate_milp(model: MilpModel) -> tuple[str, float]:
    """Exhaustive oracle: every binary assignment + ``linprog`` on the continuous rest."""
    A, row_lo, row_hi, c, lo, hi, is_bin = model.arrays()
    A = A.toarray()
    bins = np.flatnonzero(is_bin)
    cont = np.flatnonzero(~is_bin)
    combos = np.array(list(itertools.product((0.0, 1.0), repeat=len(bins)))).reshape(-1, len(bins))
    keep = np.all((combos >= lo[bins] - 1e-12) & (combos <= hi[bins] + 1e-12), axis=1)
    combos = combos[keep]
    shift = combos @ A[:, bins].T                      # (assignments, rows)
    base = combos @ c[bins]
    sign = -1.0 if model.maximize else 1.0
    if len(cont) == 0:
        ok = np.all((shift <= row_hi + 1e-9) & (shift >= row_lo - 1e-9), axis=1)
        if not ok.any():
            return "infeasible", math.nan
        return "optimal", sign * float(base[ok].min()) + model.objective_constant
    fin_hi, fin_lo = np.isfinite(row_hi), np.isfinite(row_lo)
    Ac = A[:, cont]
    A_ub = np.vstack([Ac[fin_hi], -Ac[fin_lo]])
    best, unbounded = math.inf, False
    for sh, b0 in zip(shift, base):
        b_ub = np.concatenate([row_hi[fin_hi] - sh[fin_hi], -(row_lo[fin_lo] - sh[fin_lo])])
        res = linprog(c[cont], A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                      bounds=list(zip(lo[cont], hi[cont])), method="highs")
        if res.status == 0:
            best = min(best, b0 + res.fun)
        elif res.status == 3:
            unbounded = True
    if unbounded:
        return "unbounded", math.nan
    if math.isinf(best):
        return "infeasible", math.nan
    return "optimal", sign * best + model.objective_constant
