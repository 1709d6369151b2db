"""Compile dynamics, loop structure and STL formulas into a :class:`MilpModel`.

Boolean semantics introduces one binary per (predicate, sample) and continuous
``z in [0, 1]`` variables for every other subformula; robust semantics
introduces continuous ``r`` variables equal to the robustness, tied together
by min/max gadgets with binary selectors.

Windows of temporal operators are discretised with :func:`to_steps`.  In
finite mode a window starting at sample ``t`` is truncated to
``[min(t + a, N), min(t + b, N)]``.  In lasso mode positions past ``N`` are
folded back onto the loop: for every candidate loop start ``j`` the folded
positions form a set ``S_j``, and a selector variable equal to the aggregate
over ``S_{l}`` is added to the window (exactly one loop binary ``l_j`` is 1).

Bounded until is encoded through the identity

    phi1 U[a,b] phi2  ==  G[0,a] phi1  &  F[a,b] phi2  &  F[a,a] (phi1 U[0,inf) phi2)

and the unbounded until ``phi1 U[0,inf) phi2`` (inclusive: ``phi1`` must hold at
the witness as well) through the backward recursion
``U_t = phi1_t & (phi2_t | U_{t+1})``, whose value at ``N`` is closed over the
loop with an auxiliary copy of the recursion that stops at ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .formula import (
    And,
    Eventually,
    Formula,
    FormulaError,
    Globally,
    Not,
    Or,
    Predicate,
    Until,
    dimensions,
    horizon_steps,
    is_bounded,
    is_snn,
    to_steps,
    uses_inputs,
)
from .milp import MilpModel, Solution
from .trace import AffineSystem, Run, TrivialSystem

System = AffineSystem | TrivialSystem
LinExpr = tuple[dict[int, float], float]


class EncodingError(FormulaError):
    pass


class Mode(str, Enum):
    FINITE = "finite"
    LASSO = "lasso"


class Semantics(str, Enum):
    BOOLEAN = "bool"
    ROBUST = "robust"


@dataclass(frozen=True)
class EncodingParams:
    N: int
    mode: Mode = Mode.FINITE
    semantics: Semantics = Semantics.BOOLEAN
    eps: float = 1e-4
    bigM_pad: float = 1.1
    target: float | None = None       # robust root floor; None means eps
    root_constraint: bool = True      # False leaves the root unconstrained (MPC, tests)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "semantics", Semantics(self.semantics))
        if int(self.N) != self.N or self.N < 1:
            raise EncodingError(f"horizon N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.eps > 0:
            raise EncodingError(f"eps must be positive, got {self.eps}")
        if not self.bigM_pad >= 1:
            raise EncodingError(f"bigM_pad must be >= 1, got {self.bigM_pad}")

    @property
    def robust_target(self) -> float:
        return self.eps if self.target is None else float(self.target)


class VariableCounts(NamedTuple):
    binaries: int
    continuous: int


@dataclass
class EncodingArtifacts:
    model: MilpModel
    params: EncodingParams
    system: System
    x: np.ndarray                       # (N+1, n) variable ids
    u: np.ndarray                       # (N or N+1, m) variable ids
    w: np.ndarray                       # (N or N+1, e) disturbance values
    loop: np.ndarray | None = None      # loop[j-1] is the id of l_j
    sat: dict = field(default_factory=dict)        # (subformula, t) -> z or r id
    until_aux: dict = field(default_factory=dict)  # (until subformula, t) -> aux id
    root: int | None = None
    formula: Formula | None = None
    labels: dict = field(default_factory=dict)     # subformula -> short label
    stl_counts: VariableCounts = VariableCounts(0, 0)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def trivial(self) -> bool:
        return isinstance(self.system, TrivialSystem)

    def decode(self, solution: Solution) -> Run:
        """Turn a solved assignment into a :class:`Run` (with loop index in lasso mode)."""
        xs = solution.values(self.x.ravel()).reshape(self.x.shape)
        us = solution.values(self.u.ravel()).reshape(self.u.shape) if self.u.size else \
            np.zeros((self.u.shape[0], self.u.shape[1]))
        loop_index = None
        if self.loop is not None:
            lv = solution.values(self.loop)
            loop_index = int(np.argmax(lv)) + 1
        return Run(xs, us, self.w, self.system.dt, loop_index)

    def variable_map(self) -> dict:
        """Human-readable map from subformulas and grids to model variable names."""
        names = [v.name for v in self.model.variables]
        out = {
            "x": [[names[v] for v in row] for row in self.x],
            "u": [[names[v] for v in row] for row in self.u],
            "loop": None if self.loop is None else [names[v] for v in self.loop],
            "root": None if self.root is None else names[self.root],
            "subformulas": {},
        }
        for (phi, t), var in self.sat.items():
            entry = out["subformulas"].setdefault(self.labels.get(phi, "?"), {"formula": str(phi), "vars": {}})
            entry["vars"][str(t)] = names[var]
        return out


# -- system and loop --------------------------------------------------------


def _disturbances(sys: System, w, N: int) -> np.ndarray:
    e = sys.e
    if w is None:
        return np.zeros((N, e))
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w.reshape(-1, 1) if e == 1 else w.reshape(-1, e)
    if w.shape[1:] != (e,) or w.shape[0] not in (N, N + 1):
        raise EncodingError(f"disturbances need shape ({N}, {e}) or ({N + 1}, {e}), got {w.shape}")
    return w


def encode_system(model: MilpModel, sys: System, x0, w, N: int, *,
                  terminal_input: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """State and input grids plus the dynamics rows.

    Returns ``(x, u, w)`` where ``x``/``u`` hold variable ids.  For an
    :class:`AffineSystem` the inputs cover ``0..N-1`` (``0..N`` when
    ``terminal_input``); the dynamics-free :class:`TrivialSystem` ties
    ``x_k = u_k`` for ``k = 0..N``.
    """
    n = sys.n
    x = np.empty((N + 1, n), dtype=int)
    for k in range(N + 1):
        for i, (lo, hi) in enumerate(sys.x_bounds):
            x[k, i] = model.add_variable("continuous", lo, hi, f"x_{k}_{i + 1}")
    if isinstance(sys, TrivialSystem):
        u = np.empty((N + 1, n), dtype=int)
        for k in range(N + 1):
            for i, (lo, hi) in enumerate(sys.u_bounds):
                u[k, i] = model.add_variable("continuous", lo, hi, f"u_{k}_{i + 1}")
                model.add_constraint({x[k, i]: 1.0, u[k, i]: -1.0}, "=", 0.0, f"tie_{k}_{i + 1}")
        if x0 is not None:
            _pin_initial(model, sys, x, x0)
        return x, u, np.zeros((N, 0))

    wv = _disturbances(sys, w, N)
    if x0 is None:
        raise EncodingError("an affine system needs an initial state x0")
    _pin_initial(model, sys, x, x0)
    rows = N + 1 if terminal_input else N
    u = np.empty((rows, sys.m), dtype=int)
    for k in range(rows):
        for j, (lo, hi) in enumerate(sys.u_bounds):
            kind = "binary" if sys.binary_inputs[j] else "continuous"
            u[k, j] = model.add_variable(kind, lo, hi, f"u_{k}_{j + 1}")
    for k in range(N):
        for i in range(n):
            expr = {x[k + 1, i]: 1.0}
            for a in range(n):
                if sys.A[i, a] != 0.0:
                    expr[x[k, a]] = expr.get(x[k, a], 0.0) - sys.A[i, a]
            for b in range(sys.m):
                if sys.B[i, b] != 0.0:
                    expr[u[k, b]] = expr.get(u[k, b], 0.0) - sys.B[i, b]
            rhs = float(sys.c[i] + (sys.E[i] @ wv[k] if sys.e else 0.0))
            model.add_constraint(expr, "=", rhs, f"dyn_{k}_{i + 1}")
    return x, u, wv


def _pin_initial(model: MilpModel, sys: System, x: np.ndarray, x0) -> None:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (sys.n,):
        raise EncodingError(f"x0 needs {sys.n} components, got {x0.shape[0]}")
    for i, (lo, hi) in enumerate(sys.x_bounds):
        if not lo <= x0[i] <= hi:
            raise EncodingError(f"x0[{i + 1}] = {x0[i]} outside state bounds [{lo}, {hi}]")
        model.fix(int(x[0, i]), float(x0[i]))


def encode_loop(model: MilpModel, N: int, x: np.ndarray, x_bounds, pad: float = 1.1,
                u: np.ndarray | None = None, u_bounds=None) -> np.ndarray:
    """Loop binaries ``l_1..l_N`` with ``sum l_j = 1`` and ``l_j => x_N = x_{j-1}``.

    When ``u`` has a terminal row ``N`` it is tied to ``u_{j-1}`` the same way,
    so the signal at ``N`` duplicates the signal at ``l - 1`` exactly.
    """
    if not x_bounds:
        raise EncodingError("loop constraints need state bounds")
    loop = np.array([model.add_variable("binary", 0, 1, f"l_{j}") for j in range(1, N + 1)], dtype=int)
    model.add_constraint({int(v): 1.0 for v in loop}, "=", 1.0, "loop_sum")
    tied = [(x, x_bounds, "x")]
    if u is not None and u.shape[0] == N + 1 and u_bounds is not None:
        tied.append((u, u_bounds, "u"))
    for grid, bounds, tag in tied:
        for j in range(1, N + 1):
            lj = int(loop[j - 1])
            for i, (lo, hi) in enumerate(bounds):
                M = (hi - lo) * pad
                a, b = int(grid[N, i]), int(grid[j - 1, i])
                if a == b:
                    continue
                model.add_constraint({a: 1.0, b: -1.0, lj: M}, "<=", M, f"loop{tag}_hi_{j}_{i + 1}")
                model.add_constraint({a: 1.0, b: -1.0, lj: -M}, ">=", -M, f"loop{tag}_lo_{j}_{i + 1}")
    return loop


# -- STL ----------------------------------------------------------------------


class _StlEncoder:
    """Builds subformula variables for every sample ``t = 0..N``."""

    def __init__(self, model: MilpModel, art: EncodingArtifacts, params: EncodingParams):
        self.model = model
        self.art = art
        self.p = params
        self.N = params.N
        self.dt = art.system.dt
        self.robust = params.semantics == Semantics.ROBUST
        self.lasso = params.mode == Mode.LASSO
        self.rng: dict[int, tuple[float, float]] = {}
        self._agg: dict = {}
        self._sel: dict = {}
        self._until0: dict = {}
        self._count = 0
        self._labels = art.labels

    # -- naming / allocation

    def _name(self, prefix: str) -> str:
        self._count += 1
        return f"{prefix}{self._count}"

    def _label(self, phi) -> str:
        if phi not in self._labels:
            self._labels[phi] = f"f{len(self._labels)}"
        return self._labels[phi]

    def _new(self, lo: float, hi: float, name: str, kind: str = "continuous") -> int:
        var = self.model.add_variable(kind, lo, hi, name)
        self.rng[var] = (lo, hi)
        return var

    # -- signals

    def _signal_terms(self, pred: Predicate, t: int) -> tuple[dict[int, float], float, float, float]:
        """Linear expression of ``mu`` at sample ``t`` and its range over the boxes."""
        sys = self.art.system
        expr: dict[int, float] = {}
        const = pred.offset
        lo = hi = pred.offset
        for i, c in enumerate(pred.coeffs_x):
            if c == 0.0:
                continue
            if i >= sys.n:
                raise EncodingError(f"predicate uses x{i + 1} but the system has {sys.n} states")
            var = int(self.art.x[t, i])
            b_lo, b_hi = self.model.variables[var].lower, self.model.variables[var].upper
            expr[var] = expr.get(var, 0.0) + c
            lo, hi = lo + min(c * b_lo, c * b_hi), hi + max(c * b_lo, c * b_hi)
        for i, c in enumerate(pred.coeffs_u):
            if c == 0.0:
                continue
            if i >= sys.m:
                raise EncodingError(f"predicate uses u{i + 1} but the system has {sys.m} inputs")
            row = min(t, self.art.u.shape[0] - 1)
            var = int(self.art.u[row, i])
            b_lo, b_hi = self.model.variables[var].lower, self.model.variables[var].upper
            expr[var] = expr.get(var, 0.0) + c
            lo, hi = lo + min(c * b_lo, c * b_hi), hi + max(c * b_lo, c * b_hi)
        w = self.art.w
        for i, c in enumerate(pred.coeffs_w):
            if c == 0.0:
                continue
            if i >= w.shape[1]:
                raise EncodingError(f"predicate uses w{i + 1} but the system has {w.shape[1]} disturbances")
            if t < w.shape[0]:
                const += c * w[t, i]
                lo, hi = lo + c * w[t, i], hi + c * w[t, i]
            elif self.art.loop is not None:
                # w_N = sum_j l_j w_{j-1}: exactly one loop binary is set
                for j in range(1, self.N + 1):
                    lj = int(self.art.loop[j - 1])
                    expr[lj] = expr.get(lj, 0.0) + c * w[j - 1, i]
                vals = c * w[: self.N, i]
                lo, hi = lo + vals.min(), hi + vals.max()
            else:
                const += c * w[-1, i]
                lo, hi = lo + c * w[-1, i], hi + c * w[-1, i]
        expr = {k: v for k, v in expr.items() if v != 0.0}
        return expr, const, lo, hi

    # -- Boolean gadgets

    def _b_pred(self, pred: Predicate, t: int, label: str) -> int:
        expr, const, lo, hi = self._signal_terms(pred, t)
        z = self._new(0, 1, f"z{label}_{t}", "binary")
        if not expr:
            self.model.fix(z, 1.0 if const > 0 else 0.0)
            return z
        eps = self.p.eps
        M = self.p.bigM_pad * max(abs(lo), abs(hi)) + eps
        # mu <= M z - eps   and   -mu <= M (1 - z) - eps
        row = dict(expr)
        row[z] = row.get(z, 0.0) - M
        self.model.add_constraint(row, "<=", -eps - const, f"pz{label}_{t}_a")
        row = {k: -v for k, v in expr.items()}
        row[z] = row.get(z, 0.0) + M
        self.model.add_constraint(row, "<=", M - eps + const, f"pz{label}_{t}_b")
        return z

    def _b_not(self, v: int, name: str) -> int:
        z = self._new(0, 1, name)
        self.model.add_constraint({z: 1.0, v: 1.0}, "=", 1.0, f"c{name}")
        return z

    def _b_and(self, vs: list[int]) -> int:
        vs = list(dict.fromkeys(vs))
        if len(vs) == 1:
            return vs[0]
        key = ("and", frozenset(vs))
        if key in self._agg:
            return self._agg[key]
        name = self._name("a")
        z = self._new(0, 1, name)
        for i, v in enumerate(vs):
            self.model.add_constraint({z: 1.0, v: -1.0}, "<=", 0.0, f"c{name}_{i}")
        row = {z: 1.0}
        for v in vs:
            row[v] = row.get(v, 0.0) - 1.0
        self.model.add_constraint(row, ">=", 1.0 - len(vs), f"c{name}_s")
        self._agg[key] = z
        return z

    def _b_or(self, vs: list[int]) -> int:
        vs = list(dict.fromkeys(vs))
        if len(vs) == 1:
            return vs[0]
        key = ("or", frozenset(vs))
        if key in self._agg:
            return self._agg[key]
        name = self._name("o")
        z = self._new(0, 1, name)
        for i, v in enumerate(vs):
            self.model.add_constraint({z: 1.0, v: -1.0}, ">=", 0.0, f"c{name}_{i}")
        row = {z: 1.0}
        for v in vs:
            row[v] = row.get(v, 0.0) - 1.0
        self.model.add_constraint(row, "<=", 0.0, f"c{name}_s")
        self._agg[key] = z
        return z

    # -- robust gadgets

    def _r_pred(self, pred: Predicate, t: int, label: str) -> int:
        expr, const, lo, hi = self._signal_terms(pred, t)
        r = self._new(lo, hi, f"r{label}_{t}")
        row = {k: -v for k, v in expr.items()}
        row[r] = 1.0
        self.model.add_constraint(row, "=", const, f"pr{label}_{t}")
        return r

    def _r_not(self, v: int, name: str) -> int:
        lo, hi = self.rng[v]
        r = self._new(-hi, -lo, name)
        self.model.add_constraint({r: 1.0, v: 1.0}, "=", 0.0, f"c{name}")
        return r

    def _r_minmax(self, vs: list[int], is_min: bool) -> int:
        vs = list(dict.fromkeys(vs))
        if len(vs) == 1:
            return vs[0]
        key = ("min" if is_min else "max", frozenset(vs))
        if key in self._agg:
            return self._agg[key]
        los = [self.rng[v][0] for v in vs]
        his = [self.rng[v][1] for v in vs]
        lo, hi = (min(los), min(his)) if is_min else (max(los), max(his))
        M = self.p.bigM_pad * (max(his) - min(los)) + 1.0
        name = self._name("m" if is_min else "M")
        r = self._new(lo, hi, name)
        sel = {}
        for i, v in enumerate(vs):
            p = self._new(0, 1, f"{name}_p{i}", "binary")
            sel[p] = 1.0
            if is_min:
                # r <= r_i ;  r >= r_i - M (1 - p_i)
                self.model.add_constraint({r: 1.0, v: -1.0}, "<=", 0.0, f"c{name}_{i}")
                self.model.add_constraint({r: 1.0, v: -1.0, p: -M}, ">=", -M, f"c{name}_{i}s")
            else:
                self.model.add_constraint({r: 1.0, v: -1.0}, ">=", 0.0, f"c{name}_{i}")
                self.model.add_constraint({r: 1.0, v: -1.0, p: M}, "<=", M, f"c{name}_{i}s")
        self.model.add_constraint(sel, "=", 1.0, f"c{name}_sel")
        self._agg[key] = r
        return r

    # -- dispatch

    def conj(self, vs):
        return self._r_minmax(vs, True) if self.robust else self._b_and(vs)

    def disj(self, vs):
        return self._r_minmax(vs, False) if self.robust else self._b_or(vs)

    def select(self, pairs: list[tuple[int, int]]) -> int:
        """Variable equal to ``v_j`` for the unique ``j`` with ``l_j = 1``."""
        vals = [v for _, v in pairs]
        if len(set(vals)) == 1:
            return vals[0]
        key = tuple(pairs)
        if key in self._sel:
            return self._sel[key]
        if self.robust:
            lo = min(self.rng[v][0] for v in vals)
            hi = max(self.rng[v][1] for v in vals)
            M = self.p.bigM_pad * (hi - lo) + 1.0
        else:
            lo, hi, M = 0.0, 1.0, 1.0
        name = self._name("s")
        y = self._new(lo, hi, name)
        for i, (lj, v) in enumerate(pairs):
            self.model.add_constraint({y: 1.0, v: -1.0, lj: M}, "<=", M, f"c{name}_{i}a")
            self.model.add_constraint({y: 1.0, v: -1.0, lj: -M}, ">=", -M, f"c{name}_{i}b")
        self._sel[key] = y
        return y

    # -- windows

    def _folded(self, j: int, start: int, end: int | None) -> list[int]:
        """Stored positions visited by word positions ``max(start, N+1)..end`` when ``l = j``."""
        N = self.N
        period = N - j + 1
        first = max(start, N + 1)
        if end is None or end - first + 1 >= period:
            return list(range(j, N + 1))
        return sorted({j + (q - j) % period for q in range(first, end + 1)})

    def window(self, vals: Callable[[int], int], t: int, lo: int, hi: int | None, is_conj: bool) -> int:
        agg = self.conj if is_conj else self.disj
        N = self.N
        if not self.lasso:
            s = min(t + lo, N)
            e = N if hi is None else min(t + hi, N)
            return agg([vals(i) for i in range(s, e + 1)])
        end = None if hi is None else t + hi
        terms = [vals(i) for i in range(t + lo, (N if end is None else min(end, N)) + 1)]
        if end is None or end > N:
            pairs = []
            for j in range(1, N + 1):
                pairs.append((int(self.art.loop[j - 1]),
                              agg([vals(i) for i in self._folded(j, t + lo, end)])))
            terms.append(self.select(pairs))
        return agg(terms)

    # -- formulas

    def encode(self, phi: Formula) -> None:
        if (phi, 0) in self.art.sat:
            return
        label = self._label(phi)
        sat = self.art.sat
        for child in _children(phi):
            self.encode(child)
        N = self.N
        if isinstance(phi, Predicate):
            make = self._r_pred if self.robust else self._b_pred
            for t in range(N + 1):
                sat[(phi, t)] = make(phi, t, label)
        elif isinstance(phi, Not):
            neg = self._r_not if self.robust else self._b_not
            for t in range(N + 1):
                sat[(phi, t)] = neg(sat[(phi.arg, t)], f"{'r' if self.robust else 'z'}{label}_{t}")
        elif isinstance(phi, (And, Or)):
            agg = self.conj if isinstance(phi, And) else self.disj
            for t in range(N + 1):
                sat[(phi, t)] = agg([sat[(a, t)] for a in phi.args])
        elif isinstance(phi, (Globally, Eventually)):
            steps = to_steps(phi.interval, self.dt)
            arg = phi.arg
            for t in range(N + 1):
                sat[(phi, t)] = self.window(lambda i: sat[(arg, i)], t, steps.lo_idx, steps.hi_idx,
                                            isinstance(phi, Globally))
        elif isinstance(phi, Until):
            steps = to_steps(phi.interval, self.dt)
            u0 = self._until_chain(phi)
            a, b = steps.lo_idx, steps.hi_idx
            for t in range(N + 1):
                if a == 0 and b is None:
                    sat[(phi, t)] = u0[t]
                    continue
                parts = [self.window(lambda i: sat[(phi.left, i)], t, 0, a, True)]
                if b is not None:
                    parts.append(self.window(lambda i: sat[(phi.right, i)], t, a, b, False))
                parts.append(self.window(lambda i: u0[i], t, a, a, True))
                sat[(phi, t)] = self.conj(parts)
        else:
            raise TypeError(f"not a formula: {phi!r}")

    def _until_chain(self, phi: Until) -> list[int]:
        """Variables for ``left U[0,inf) right`` at every sample (inclusive until)."""
        key = (phi.left, phi.right)
        if key in self._until0:
            return self._until0[key]
        sat, N = self.art.sat, self.N
        z1 = [sat[(phi.left, t)] for t in range(N + 1)]
        z2 = [sat[(phi.right, t)] for t in range(N + 1)]
        # finite recursion: witness must occur by N
        aux = [0] * (N + 1)
        aux[N] = self.conj([z1[N], z2[N]])
        for t in range(N - 1, -1, -1):
            aux[t] = self.conj([z1[t], self.disj([z2[t], aux[t + 1]])])
        if not self.lasso:
            chain = aux
        else:
            for t in range(N + 1):
                self.art.until_aux[(phi, t)] = aux[t]
            tail = self.select([(int(self.art.loop[j - 1]), aux[j]) for j in range(1, N + 1)])
            chain = [0] * (N + 1)
            chain[N] = self.conj([z1[N], self.disj([z2[N], tail])])
            for t in range(N - 1, -1, -1):
                chain[t] = self.conj([z1[t], self.disj([z2[t], chain[t + 1]])])
        self._until0[key] = chain
        return chain


def _children(phi: Formula):
    if isinstance(phi, Predicate):
        return ()
    if isinstance(phi, Not):
        return (phi.arg,)
    if isinstance(phi, (And, Or)):
        return phi.args
    if isinstance(phi, (Globally, Eventually)):
        return (phi.arg,)
    return (phi.left, phi.right)


def _check_formula(phi: Formula, sys: System, params: EncodingParams) -> None:
    if params.mode == Mode.FINITE:
        if not is_bounded(phi):
            raise EncodingError("unbounded operators need lasso mode")
        need = horizon_steps(phi, sys.dt)
        if need > params.N:
            raise EncodingError(
                f"horizon too short: formula looks {need} samples ahead but N = {params.N}"
            )
    nx, nu, nw = dimensions(phi)
    if nx > sys.n or nu > sys.m or nw > sys.e:
        raise EncodingError(
            f"formula needs (x, u, w) dimensions ({nx}, {nu}, {nw}); system has ({sys.n}, {sys.m}, {sys.e})"
        )


def _prepare(sys: System, phi: Formula | None, params: EncodingParams, x0, w,
             model: MilpModel | None) -> EncodingArtifacts:
    model = model if model is not None else MilpModel()
    if phi is not None:
        _check_formula(phi, sys, params)
    terminal = phi is not None and uses_inputs(phi)
    x, u, wv = encode_system(model, sys, x0, w, params.N, terminal_input=terminal)
    art = EncodingArtifacts(model, params, sys, x, u, wv, formula=phi)
    if params.mode == Mode.LASSO:
        ub = None if isinstance(sys, TrivialSystem) else sys.u_bounds
        art.loop = encode_loop(model, params.N, x, sys.x_bounds, params.bigM_pad, u, ub)
    return art


def _encode_stl(art: EncodingArtifacts, phi: Formula) -> int:
    model = art.model
    before_b, before_n = model.num_binaries, model.num_variables
    enc = _StlEncoder(model, art, art.params)
    enc.encode(phi)
    root = art.sat[(phi, 0)]
    art.root = root
    art.formula = phi
    nb = model.num_binaries - before_b
    art.stl_counts = VariableCounts(nb, model.num_variables - before_n - nb)
    if art.params.root_constraint:
        if art.params.semantics == Semantics.BOOLEAN:
            model.add_constraint({root: 1.0}, "=", 1.0, "root")
        else:
            model.add_constraint({root: 1.0}, ">=", art.params.robust_target, "root")
    return root


def encode_boolean(art: EncodingArtifacts, phi: Formula) -> int:
    if art.params.semantics != Semantics.BOOLEAN:
        raise EncodingError("encode_boolean needs Boolean semantics in the parameters")
    _check_formula(phi, art.system, art.params)
    return _encode_stl(art, phi)


def encode_robust(art: EncodingArtifacts, phi: Formula) -> int:
    if art.params.semantics != Semantics.ROBUST:
        raise EncodingError("encode_robust needs robust semantics in the parameters")
    _check_formula(phi, art.system, art.params)
    return _encode_stl(art, phi)


def encode(sys: System, phi: Formula, params: EncodingParams, x0=None, w=None,
           model: MilpModel | None = None) -> EncodingArtifacts:
    """System + (loop) + STL constraints for ``phi`` in a fresh (or given) model."""
    art = _prepare(sys, phi, params, x0, w, model)
    _encode_stl(art, phi)
    return art


def encode_snn_lp(sys: System, phi: Formula, params: EncodingParams, x0=None, w=None,
                  model: MilpModel | None = None) -> EncodingArtifacts:
    """Binary-free robust encoding for the safe negation-normal fragment.

    The robustness of an SNN formula is the minimum of its (possibly negated)
    predicate values over a fixed set of samples, so a single variable ``v``
    with ``v <= +-mu_i(t)`` for every occurrence is a lower bound that is tight
    whenever ``v`` is maximised, and ``v >= target`` is exactly the robust
    satisfaction constraint.  Finite mode only.
    """
    if not is_snn(phi):
        raise EncodingError("encode_snn_lp needs an SNN formula (atoms, negated atoms, &, G)")
    if params.mode != Mode.FINITE:
        raise EncodingError("encode_snn_lp supports finite mode only")
    art = _prepare(sys, phi, params, x0, w, model)
    model = art.model
    enc = _StlEncoder(model, art, params)
    literals: dict[tuple[Predicate, int, float], None] = {}

    def walk(node, t, sign):
        if isinstance(node, Predicate):
            literals.setdefault((node, t, sign), None)
        elif isinstance(node, Not):
            walk(node.arg, t, -sign)
        elif isinstance(node, And):
            for a in node.args:
                walk(a, t, sign)
        else:  # Globally
            steps = to_steps(node.interval, sys.dt)
            for i in range(min(t + steps.lo_idx, params.N), min(t + steps.hi_idx, params.N) + 1):
                walk(node.arg, i, sign)

    walk(phi, 0, 1.0)
    ranges = []
    rows = []
    for pred, t, sign in literals:
        expr, const, lo, hi = enc._signal_terms(pred, t)
        ranges.append((lo, hi) if sign > 0 else (-hi, -lo))
        rows.append(({k: sign * c for k, c in expr.items()}, sign * const))
    v = model.add_variable("continuous", min(r[0] for r in ranges), min(r[1] for r in ranges), "rho")
    for i, (expr, const) in enumerate(rows):
        row = {k: -c for k, c in expr.items()}
        row[v] = row.get(v, 0.0) + 1.0
        model.add_constraint(row, "<=", const, f"snn_{i}")
    art.root = v
    art.sat[(phi, 0)] = v
    art.stl_counts = VariableCounts(0, 1)
    if params.root_constraint:
        model.add_constraint({v: 1.0}, ">=", params.robust_target, "root")
    return art


def count_variables(phi: Formula, N: int, semantics="bool", dt: float = 1.0,
                    mode="finite") -> VariableCounts:
    """(binaries, continuous) created by the STL part of the encoding of ``phi``.

    System and loop variables are excluded; the count is what :func:`encode`
    adds on top of them for a dynamics-free system of matching dimension.
    """
    nx, nu, nw = dimensions(phi)
    if nu or nw:
        raise EncodingError("count_variables expects state-only predicates")
    sys = TrivialSystem(max(nx, 1), dt)
    params = EncodingParams(N=N, mode=mode, semantics=semantics, root_constraint=False)
    return encode(sys, phi, params).stl_counts
