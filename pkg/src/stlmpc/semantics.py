"""Reference STL monitor: Boolean satisfaction and robustness over runs.

This module is the oracle for the MILP encoder, so it deliberately works on
explicit index sets of the (possibly infinite) word rather than on any
recursive unfolding shared with the encoder.  Lasso runs are handled by
mapping every position of the infinite word back onto the stored samples.

A predicate with ``mu == 0`` is not satisfied and has robustness 0.  A window
that contains no sample makes ``G`` vacuously true (robustness ``+inf``) and
``F``/``U`` false (robustness ``-inf``).
"""
from __future__ import annotations

import math

from .formula import (
    And,
    EmptyIntervalError,
    Eventually,
    Formula,
    FormulaError,
    Globally,
    Not,
    Or,
    Predicate,
    Until,
    bound,
    is_bounded,
    to_steps,
)
from .trace import Run, TraceError

_EPS_TIME = 1e-9


class HorizonError(FormulaError):
    pass


def _window(run: Run, interval, p: int) -> range | None:
    """Positions of the infinite word inside ``p + interval``; None if empty.

    An unbounded window on a lasso is cut after every stored index has been
    visited once more than needed: ``max(p + lo, N) + period``.
    """
    try:
        steps = to_steps(interval, run.dt)
    except EmptyIntervalError:
        return None
    start = p + steps.lo_idx
    if steps.hi_idx is None:
        if run.loop_index is None:
            raise HorizonError("unbounded operators need a lasso run")
        return range(start, max(start, run.N) + run.period + 1)
    return range(start, p + steps.hi_idx + 1)


class _Monitor:
    def __init__(self, run: Run):
        self.run = run
        self._bool: dict[tuple[int, int], bool] = {}
        self._rob: dict[tuple[int, int], float] = {}
        self._keep: list[Formula] = []

    def _key(self, phi: Formula, p: int) -> tuple[int, int]:
        self._keep.append(phi)
        return id(phi), self.run.position(p)

    def mu(self, pred: Predicate, p: int) -> float:
        return pred.value(*self.run.signal(p))

    def sat(self, phi: Formula, p: int) -> bool:
        key = self._key(phi, p)
        hit = self._bool.get(key)
        if hit is not None:
            return hit
        if isinstance(phi, Predicate):
            out = self.mu(phi, p) > 0
        elif isinstance(phi, Not):
            out = not self.sat(phi.arg, p)
        elif isinstance(phi, And):
            out = all(self.sat(a, p) for a in phi.args)
        elif isinstance(phi, Or):
            out = any(self.sat(a, p) for a in phi.args)
        elif isinstance(phi, Globally):
            win = _window(self.run, phi.interval, p)
            out = win is None or all(self.sat(phi.arg, k) for k in win)
        elif isinstance(phi, Eventually):
            win = _window(self.run, phi.interval, p)
            out = win is not None and any(self.sat(phi.arg, k) for k in win)
        elif isinstance(phi, Until):
            win = _window(self.run, phi.interval, p)
            out = False
            if win is not None:
                # left operand must hold on every position of [p, k], k inclusive
                left_ok = all(self.sat(phi.left, j) for j in range(p, win.start))
                for k in win:
                    if not left_ok:
                        break
                    left_ok = self.sat(phi.left, k)
                    if left_ok and self.sat(phi.right, k):
                        out = True
                        break
        else:
            raise TypeError(f"not a formula: {phi!r}")
        self._bool[key] = out
        return out

    def rho(self, phi: Formula, p: int) -> float:
        key = self._key(phi, p)
        hit = self._rob.get(key)
        if hit is not None:
            return hit
        if isinstance(phi, Predicate):
            out = self.mu(phi, p)
        elif isinstance(phi, Not):
            out = -self.rho(phi.arg, p)
        elif isinstance(phi, And):
            out = min(self.rho(a, p) for a in phi.args)
        elif isinstance(phi, Or):
            out = max(self.rho(a, p) for a in phi.args)
        elif isinstance(phi, Globally):
            win = _window(self.run, phi.interval, p)
            out = math.inf if win is None else min(self.rho(phi.arg, k) for k in win)
        elif isinstance(phi, Eventually):
            win = _window(self.run, phi.interval, p)
            out = -math.inf if win is None else max(self.rho(phi.arg, k) for k in win)
        elif isinstance(phi, Until):
            win = _window(self.run, phi.interval, p)
            out = -math.inf
            if win is not None:
                prefix = min((self.rho(phi.left, j) for j in range(p, win.start)), default=math.inf)
                for k in win:
                    prefix = min(prefix, self.rho(phi.left, k))
                    out = max(out, min(self.rho(phi.right, k), prefix))
        else:
            raise TypeError(f"not a formula: {phi!r}")
        self._rob[key] = out
        return out


def _check(run: Run, phi: Formula, k: int) -> None:
    if k < 0 or k > run.N and run.loop_index is None:
        raise HorizonError(f"index {k} outside run of length N={run.N}")
    if run.loop_index is not None:
        return
    if not is_bounded(phi):
        raise HorizonError("unbounded operators can only be monitored on lasso runs")
    needed = run.time(k) + bound(phi)
    if needed > run.time(run.N) + _EPS_TIME * max(1.0, needed):
        raise HorizonError(
            f"run too short: formula needs t_N >= {needed:g}, run ends at {run.time(run.N):g}"
        )


def satisfies(run: Run, phi: Formula, k: int = 0) -> bool:
    _check(run, phi, k)
    return _Monitor(run).sat(phi, k)


def robustness(run: Run, phi: Formula, k: int = 0) -> float:
    _check(run, phi, k)
    return _Monitor(run).rho(phi, k)


def finitely_satisfies(run: Run, phi: Formula) -> bool:
    """Satisfaction at position 0 of the infinite word induced by an (N,l)-loop."""
    if run.loop_index is None:
        raise TraceError("finite satisfaction needs a lasso run")
    return satisfies(run, phi, 0)
