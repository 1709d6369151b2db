"""Open-loop synthesis, the floored/pinned open-loop variant, and receding-horizon MPC.

All three build a model with :mod:`stlmpc.encoder`, add a cost, solve it with
:mod:`stlmpc.milp` and check the decoded run with the independent monitor in
:mod:`stlmpc.semantics`.  A run the monitor rejects is never returned as a
success (:class:`VerificationError`).

Receding horizon (``mpc``) for ``G phi_mpc`` with ``H`` the bound of
``phi_mpc`` in samples: at step ``t`` a window of ``2H`` samples starting at
``s = max(0, t - H)`` is solved from the realized state ``x_s``.  The inputs
already committed at ``s .. t-1`` are pinned, the robustness of ``phi_mpc`` at
window offsets ``i = 0 .. t - s`` must be positive (floor ``P_i = 0``) and the
remaining offsets carry the inactive floor ``P_i = -M``.  Only the input at
window index ``t - s`` is committed.  For ``t <= H`` this is the transient
schedule (growing pinned prefix ``u_0 .. u_{t-1}``, floors on offsets ``0..t``);
afterwards the window slides and every floor ``P_0 .. P_H`` is active.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoder import (
    EncodingArtifacts,
    EncodingError,
    EncodingParams,
    Mode,
    Semantics,
    encode,
    encode_snn_lp,
)
from .formula import Formula, Globally, Interval, horizon_steps, is_bounded
from .milp import MilpModel, Solution, SolverConfig, Status, solve
from .semantics import robustness, satisfies
from .trace import AffineSystem, Run, TrivialSystem

System = AffineSystem | TrivialSystem

VERIFY_TOL = 1e-6


class SynthesisError(RuntimeError):
    pass


class InfeasibleError(SynthesisError):
    """No trajectory satisfies the specification at this horizon."""

    def __init__(self, message: str = "no trajectory at this horizon", diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverLimitError(SynthesisError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class VerificationError(SynthesisError):
    """The monitor disagrees with the solver about the synthesized run."""


# -- costs --------------------------------------------------------------------


@dataclass(frozen=True)
class L1InputNorm:
    """``sum_k ||u_k||_1`` over every input sample of the horizon."""

    weight: float = 1.0


@dataclass(frozen=True)
class LInfInputNorm:
    """``max_k ||u_k||_inf`` over the horizon."""

    weight: float = 1.0


@dataclass(frozen=True)
class LinearStateInput:
    """``sum_k q . x_k + r . u_k``; missing weights are zero."""

    state_weights: tuple[float, ...] = ()
    input_weights: tuple[float, ...] = ()


@dataclass(frozen=True)
class MaxRobustness:
    """Maximise ``weight * r_0`` (robust semantics only), optionally minus a linear cost."""

    weight: float = 1.0
    linear: LinearStateInput | None = None


CostSpec = L1InputNorm | LInfInputNorm | LinearStateInput | MaxRobustness


def parse_cost(name: str) -> CostSpec:
    table = {"l1": L1InputNorm(), "linf": LInfInputNorm(), "maxrob": MaxRobustness()}
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown cost {name!r}; choose from {sorted(table)}") from None


def _free_inputs(art: EncodingArtifacts, pinned_rows: int = 0) -> list[int]:
    return [int(v) for v in art.u[pinned_rows:].ravel()]


def apply_cost(art: EncodingArtifacts, cost: CostSpec, extra: dict[int, float] | None = None) -> None:
    """Set the model objective (minimisation) for ``cost`` plus optional ``extra`` terms."""
    model = art.model
    obj: dict[int, float] = {}

    def add(var, coef):
        obj[var] = obj.get(var, 0.0) + coef

    if isinstance(cost, L1InputNorm):
        for var in _free_inputs(art):
            lo, hi = model.variables[var].lower, model.variables[var].upper
            if lo >= 0.0:
                add(var, cost.weight)
                continue
            a = model.add_variable("continuous", 0.0, max(abs(lo), abs(hi)), f"abs_{model.variables[var].name}")
            model.add_constraint({a: 1.0, var: -1.0}, ">=", 0.0, f"abs_p_{var}")
            model.add_constraint({a: 1.0, var: 1.0}, ">=", 0.0, f"abs_n_{var}")
            add(a, cost.weight)
    elif isinstance(cost, LInfInputNorm):
        inputs = _free_inputs(art)
        if inputs:
            top = max(max(abs(model.variables[v].lower), abs(model.variables[v].upper)) for v in inputs)
            m = model.add_variable("continuous", 0.0, top, "u_inf")
            for var in inputs:
                model.add_constraint({m: 1.0, var: -1.0}, ">=", 0.0, f"inf_p_{var}")
                model.add_constraint({m: 1.0, var: 1.0}, ">=", 0.0, f"inf_n_{var}")
            add(m, cost.weight)
    elif isinstance(cost, LinearStateInput):
        _linear(art, cost, add)
    elif isinstance(cost, MaxRobustness):
        if art.params.semantics != Semantics.ROBUST:
            raise EncodingError("MaxRobustness needs robust semantics")
        add(art.root, -cost.weight)
        if cost.linear is not None:
            _linear(art, cost.linear, add)
    else:
        raise TypeError(f"unknown cost {cost!r}")
    for var, coef in (extra or {}).items():
        add(var, coef)
    model.set_objective(obj, maximize=False)


def _linear(art: EncodingArtifacts, cost: LinearStateInput, add) -> None:
    q = np.zeros(art.x.shape[1])
    q[:len(cost.state_weights)] = cost.state_weights[:art.x.shape[1]]
    r = np.zeros(art.u.shape[1])
    r[:len(cost.input_weights)] = cost.input_weights[:art.u.shape[1]]
    for row in art.x:
        for i, var in enumerate(row):
            if q[i]:
                add(int(var), float(q[i]))
    for row in art.u:
        for j, var in enumerate(row):
            if r[j]:
                add(int(var), float(r[j]))


# -- open loop ------------------------------------------------------------------


@dataclass
class SynthesisResult:
    inputs: np.ndarray
    run: Run
    diagnostics: dict


def _solve(model: MilpModel, solver: SolverConfig | None) -> Solution:
    return solve(model, solver or SolverConfig())


def _stats(art: EncodingArtifacts, sol: Solution, elapsed: float) -> dict:
    model = art.model
    return {
        "status": sol.status.value,
        "objective": sol.objective_value,
        "binaries": model.num_binaries,
        "continuous": model.num_variables - model.num_binaries,
        "constraints": model.num_constraints,
        "nodes": sol.stats.get("nodes"),
        "solve_time": sol.stats.get("time", elapsed),
        "wall_time": elapsed,
    }


def check_run(run: Run, phi: Formula, semantics, target: float | None = None, k: int = 0) -> tuple[bool, float]:
    """Monitor verdict used as the self-check: ``(ok, robustness)``."""
    rho = robustness(run, phi, k)
    if Semantics(semantics) == Semantics.BOOLEAN:
        return satisfies(run, phi, k), rho
    return rho >= (target if target is not None else 0.0) - VERIFY_TOL, rho


def open_loop(sys: System, x0, w, N: int, phi: Formula, cost: CostSpec = L1InputNorm(),
              params: EncodingParams | None = None, *, solver: SolverConfig | None = None,
              snn_lp: bool = False) -> SynthesisResult:
    """Synthesize inputs over ``N`` steps so that the run satisfies ``phi``.

    ``params`` supplies mode, semantics, eps, target and big-M padding (its
    ``N`` is replaced by the argument).  The run is checked by the monitor:
    Boolean mode needs satisfaction, robust mode robustness ``>= target - 1e-6``.
    """
    params = dataclasses.replace(params or EncodingParams(N=N), N=N, root_constraint=True)
    if params.mode == Mode.FINITE and not is_bounded(phi):
        raise EncodingError("unbounded formulas need lasso mode")
    t0 = time.perf_counter()
    if snn_lp:
        if params.semantics != Semantics.ROBUST:
            params = dataclasses.replace(params, semantics=Semantics.ROBUST)
        art = encode_snn_lp(sys, phi, params, x0=x0, w=w)
    else:
        art = encode(sys, phi, params, x0=x0, w=w)
    apply_cost(art, cost)
    sol = _solve(art.model, solver)
    diag = _stats(art, sol, time.perf_counter() - t0)
    if sol.status == Status.INFEASIBLE:
        raise InfeasibleError(diagnostics=diag)
    if sol.status == Status.UNBOUNDED:
        raise SynthesisError("cost is unbounded below")
    if sol.assignment is None:
        raise SolverLimitError("solver budget exhausted without a feasible trajectory", diag)
    run = art.decode(sol)
    target = params.robust_target if params.semantics == Semantics.ROBUST else None
    ok, rho = check_run(run, phi, params.semantics, target)
    diag.update(monitor_robustness=rho, verified=ok, root_value=float(sol[art.root]),
                proven_optimal=sol.status == Status.OPTIMAL, loop_index=run.loop_index)
    if not ok:
        raise VerificationError(
            f"monitor rejects the synthesized run (robustness {rho:.6g}, target {target})")
    return SynthesisResult(run.inputs.copy(), run, diag)


# -- OPEN_LOOP* ---------------------------------------------------------------


@dataclass
class WindowResult:
    inputs: np.ndarray          # window inputs (2H or 2H+1 rows)
    run: Run                    # window run starting at the window's first sample
    offsets: np.ndarray         # solved robustness of phi_mpc at offsets 0..H
    slack: float                # total floor violation (soft mode only; 0 otherwise)
    diagnostics: dict


def floor_value(art: EncodingArtifacts, offsets: Sequence[int]) -> float:
    """``-M``: below every reachable robustness value, so such a floor never binds."""
    lows = [art.model.variables[art.sat[(art.formula, i)]].lower for i in offsets]
    highs = [art.model.variables[art.sat[(art.formula, i)]].upper for i in offsets]
    span = max(max(abs(v) for v in lows), max(abs(v) for v in highs))
    return -(span * art.params.bigM_pad + 1.0)


def open_loop_star(sys: System, x_t, w, N: int, phi_mpc: Formula, cost: CostSpec,
                   P: Sequence[float] | None, u_old, params: EncodingParams | None = None, *,
                   solver: SolverConfig | None = None, soften: bool = False,
                   soften_weight: float = 1e4) -> WindowResult:
    """Finite-horizon robust solve with robustness floors and pinned leading inputs.

    ``P`` lists floors for offsets ``0..H`` (``len(P) = H + 1``); a floor of
    ``None``/``-inf`` is replaced by the derived ``-M``.  The constraint at
    offset ``i`` is ``r_i >= P_i + eps`` (robustness strictly above the floor).
    ``u_old`` pins the first ``len(u_old) <= H`` inputs.  No loop constraints.
    With ``soften`` the floors become penalised: the objective gains
    ``soften_weight * sum_i max(0, P_i + eps - r_i)``.
    """
    params = dataclasses.replace(params or EncodingParams(N=N), N=N, mode=Mode.FINITE,
                                 semantics=Semantics.ROBUST, root_constraint=False)
    u_old = np.zeros((0, sys.m)) if u_old is None else np.asarray(u_old, dtype=float).reshape(-1, sys.m)
    H = horizon_steps(phi_mpc, sys.dt) if P is None else len(P) - 1
    if P is None:
        P = [None] * (H + 1)
    if len(P) != H + 1:
        raise ValueError(f"P needs H + 1 = {H + 1} entries")
    if u_old.shape[0] > H:
        raise ValueError(f"u_old has {u_old.shape[0]} rows, more than H = {H}")
    if 2 * H > N or horizon_steps(phi_mpc, sys.dt) > H:
        raise EncodingError(f"window of {N} samples cannot hold offsets 0..{H} of a formula with bound "
                            f"{horizon_steps(phi_mpc, sys.dt)}")
    t0 = time.perf_counter()
    x0 = None if isinstance(sys, TrivialSystem) else x_t
    art = encode(sys, phi_mpc, params, x0=x0, w=w)
    model = art.model
    for k, row in enumerate(u_old):
        for j, val in enumerate(row):
            var = int(art.u[k, j])
            v = model.variables[var]
            if not v.lower - 1e-6 <= val <= v.upper + 1e-6:
                raise ValueError(f"pinned input u[{k}, {j}] = {val} is outside its bounds")
            model.fix(var, float(min(max(val, v.lower), v.upper)))
    offsets = list(range(H + 1))
    neg_m = floor_value(art, offsets)
    extra: dict[int, float] = {}
    slacks = []
    for i in offsets:
        r = art.sat[(phi_mpc, i)]
        p = P[i]
        active = p is not None and math.isfinite(p) and p > neg_m
        rhs = (p + params.eps) if active else neg_m
        if soften and active:
            s = model.add_variable("continuous", 0.0, rhs - neg_m, f"slack_{i}")
            model.add_constraint({r: 1.0, s: 1.0}, ">=", rhs, f"floor_{i}")
            extra[s] = soften_weight
            slacks.append(s)
        else:
            model.add_constraint({r: 1.0}, ">=", rhs, f"floor_{i}")
    apply_cost(art, cost, extra)
    sol = _solve(model, solver)
    diag = _stats(art, sol, time.perf_counter() - t0)
    if sol.status == Status.INFEASIBLE:
        raise InfeasibleError("no trajectory satisfies the floors in this window", diag)
    if sol.assignment is None:
        raise SolverLimitError("solver budget exhausted in this window", diag)
    run = art.decode(sol)
    values = np.array([sol[art.sat[(phi_mpc, i)]] for i in offsets])
    slack = float(sum(sol[s] for s in slacks))
    return WindowResult(run.inputs.copy(), run, values, slack, diag)


# -- receding horizon -------------------------------------------------------------


DisturbancePredictor = Callable[[int], np.ndarray]


def exact_predictor(w, length: int) -> DisturbancePredictor:
    """Predictor returning rows ``t .. t + length - 1`` of the true disturbance trace.

    Rows past the stored trace repeat its last row.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w.reshape(-1, 1)

    def predict(t: int) -> np.ndarray:
        if w.shape[1] == 0:
            return np.zeros((length, 0))
        idx = np.minimum(np.arange(t, t + length), w.shape[0] - 1)
        return w[idx]

    return predict


@dataclass
class MpcState:
    t: int
    H: int
    P: list[float]
    u_old: np.ndarray
    states: list[np.ndarray] = field(default_factory=list)
    inputs: list[np.ndarray] = field(default_factory=list)

    @property
    def phase(self) -> str:
        return "transient" if self.t <= self.H else "stationary"


@dataclass
class MpcStep:
    step: int
    phase: str
    status: str
    wall_time: float
    objective: float
    pinned: int
    robustness: tuple[float, ...]
    slack: float = 0.0
    nodes: int | None = None

    def row(self) -> dict:
        out = {"step": self.step, "phase": self.phase, "status": self.status,
               "wall_time": f"{self.wall_time:.6f}", "objective": repr(float(self.objective)),
               "pinned": self.pinned, "slack": repr(float(self.slack)),
               "nodes": "" if self.nodes is None else self.nodes}
        for i, r in enumerate(self.robustness):
            out[f"rho_{i}"] = repr(float(r))
        return out


@dataclass
class MpcResult:
    run: Run
    steps: list[MpcStep]
    H: int
    completed: bool
    failed_step: int | None = None
    message: str = ""
    checked_offsets: int = 0
    violations: list[int] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return self.completed and not self.violations


def mpc_horizon(phi_mpc: Formula, dt: float, H: int | None = None) -> int:
    bound = horizon_steps(phi_mpc, dt)
    H = max(1, bound) if H is None else int(H)
    if H < max(bound, 1):
        raise EncodingError(f"H = {H} is shorter than the formula bound ({bound} samples)")
    return H


def mpc(sys: System, x0, phi_mpc: Formula, cost: CostSpec, predictor: DisturbancePredictor | None,
        total_steps: int, params: EncodingParams | None = None, *, w_true=None, H: int | None = None,
        solver: SolverConfig | None = None, soften: bool = False) -> MpcResult:
    """Receding-horizon control for ``G phi_mpc`` over ``total_steps`` committed inputs.

    ``w_true`` is the disturbance actually applied to the plant (defaults to the
    predictor's view from step 0, which is exact by assumption).  The realized
    run has ``total_steps + 1`` states; its last input row is the final plan's
    next input so that input predicates can be evaluated at the last sample.
    Afterwards the monitor checks ``phi_mpc`` at every offset
    ``k <= total_steps - H``.
    """
    if not is_bounded(phi_mpc):
        raise EncodingError("phi_mpc must be bounded")
    H = mpc_horizon(phi_mpc, sys.dt, H)
    if total_steps < 2 * H:
        raise ValueError(f"total_steps must be at least 2H = {2 * H}")
    N = 2 * H
    if predictor is None:
        if sys.e:
            raise ValueError("a system with disturbances needs a predictor")
        predictor = exact_predictor(np.zeros((1, 0)), N + 1)
    if w_true is None:
        w_true = predictor(0) if sys.e == 0 else np.vstack([predictor(k)[:1] for k in range(total_steps + 1)])
    w_true = np.asarray(w_true, dtype=float).reshape(-1, sys.e) if sys.e else np.zeros((total_steps + 1, 0))
    trivial = isinstance(sys, TrivialSystem)
    state = MpcState(0, H, [], np.zeros((0, sys.m)))
    if not trivial:
        state.states.append(np.asarray(x0, dtype=float).reshape(sys.n))
    steps: list[MpcStep] = []
    window = None
    for t in range(total_steps):
        s = max(0, t - H)
        pinned = t - s
        state.t = t
        state.u_old = np.array(state.inputs[s:t]).reshape(pinned, sys.m)
        state.P = [0.0 if i <= pinned else None for i in range(H + 1)]
        if t > H:
            # window consistency: the pinned inputs are exactly the last H commitments
            assert state.u_old.shape[0] == H and np.array_equal(state.u_old, np.array(state.inputs[t - H:t]))
        w = predictor(s)
        x_s = None if trivial else state.states[s]
        t0 = time.perf_counter()
        try:
            window = open_loop_star(sys, x_s, w, N, phi_mpc, cost, state.P, state.u_old, params,
                                    solver=solver, soften=soften)
        except (InfeasibleError, SolverLimitError) as exc:
            steps.append(MpcStep(t, state.phase, exc.diagnostics.get("status", "Infeasible"),
                                 time.perf_counter() - t0, math.nan, pinned, (), nodes=exc.diagnostics.get("nodes")))
            run = _realized(sys, state, w_true, None)
            return MpcResult(run, steps, H, False, t, f"step {t}: {exc}")
        # solver tolerances may leave inputs a hair outside their box; the plant gets the clipped value
        lo_u, hi_u = np.array(sys.u_bounds, dtype=float).T
        u_t = np.clip(window.inputs[pinned], lo_u, hi_u)
        state.inputs.append(u_t)
        if not trivial:
            state.states.append(np.asarray(sys.step(state.states[t], u_t, w_true[t] if sys.e else None)))
        steps.append(MpcStep(t, state.phase, window.diagnostics["status"], time.perf_counter() - t0,
                             window.diagnostics["objective"], pinned, tuple(window.offsets),
                             window.slack, window.diagnostics.get("nodes")))
    final = window.inputs[total_steps - max(0, total_steps - 1 - H)] \
        if window is not None and total_steps - max(0, total_steps - 1 - H) < window.inputs.shape[0] else None
    run = _realized(sys, state, w_true, final)
    result = MpcResult(run, steps, H, True)
    last = total_steps - H
    result.checked_offsets = last + 1
    result.violations = [k for k in range(last + 1) if not satisfies(run, phi_mpc, k)]
    return result


def _realized(sys: System, state: MpcState, w_true: np.ndarray, terminal_input) -> Run:
    inputs = [np.asarray(u) for u in state.inputs]
    T = len(inputs)
    if isinstance(sys, TrivialSystem):
        if terminal_input is not None:
            inputs = inputs + [np.asarray(terminal_input)]
        if not inputs:
            return Run(np.zeros((1, sys.n)), np.zeros((1, sys.m)), np.zeros((1, 0)), sys.dt)
        xs = np.array(inputs)
        return Run(xs, xs, np.zeros((xs.shape[0], 0)), sys.dt)
    xs = np.array(state.states[:T + 1])
    us = np.array(inputs).reshape(T, sys.m)
    if terminal_input is not None:
        us = np.vstack([us, np.asarray(terminal_input).reshape(1, sys.m)])
    ws = w_true[:us.shape[0]] if sys.e else np.zeros((us.shape[0], 0))
    if T == 0:
        us = np.zeros((0, sys.m))
        ws = np.zeros((0, sys.e))
    return Run(xs, us, ws, sys.dt)


def as_mpc_formula(phi: Formula) -> Formula:
    """``phi_mpc`` from ``G[0,inf) phi_mpc`` (any other formula is returned unchanged)."""
    if isinstance(phi, Globally) and not phi.interval.bounded and phi.interval.lo == 0:
        return phi.arg
    return phi


def wrap_window(phi_mpc: Formula, H: int, dt: float) -> Formula:
    """``G[0, H dt] phi_mpc`` — the specification one MPC window certifies."""
    return Globally(Interval(0.0, H * dt), phi_mpc)
