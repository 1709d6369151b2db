"""STL abstract syntax: predicates, Boolean connectives and timed temporal operators.

Formulas are immutable, hashable trees.  Structurally equal subformulas
compare equal, which the encoder relies on to share MILP variables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

INF = math.inf


class FormulaError(ValueError):
    pass


class UnboundedFormulaError(FormulaError):
    pass


class EmptyIntervalError(FormulaError):
    pass


def _trim(coeffs) -> tuple[float, ...]:
    vals = [float(c) for c in coeffs]
    while vals and vals[-1] == 0.0:
        vals.pop()
    return tuple(vals)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float = INF

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not math.isfinite(lo) or lo < 0:
            raise FormulaError(f"interval lower bound must be finite and >= 0, got {lo}")
        if hi < lo:
            raise FormulaError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    def __str__(self) -> str:
        if self.bounded:
            return f"[{_num(self.lo)},{_num(self.hi)}]"
        return f"[{_num(self.lo)},inf)"


@dataclass(frozen=True)
class StepInterval:
    """Interval in sample indices; ``hi_idx is None`` marks an unbounded end."""

    lo_idx: int
    hi_idx: int | None

    @property
    def bounded(self) -> bool:
        return self.hi_idx is not None


@dataclass(frozen=True)
class Predicate:
    """Linear predicate ``cx.x + cu.u + cw.w + offset > 0``.

    Coefficient tuples are 0-based and trailing zeros are trimmed so that
    equal predicates compare equal regardless of how they were written.
    """

    coeffs_x: tuple[float, ...] = ()
    coeffs_u: tuple[float, ...] = ()
    coeffs_w: tuple[float, ...] = ()
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs_x", _trim(self.coeffs_x))
        object.__setattr__(self, "coeffs_u", _trim(self.coeffs_u))
        object.__setattr__(self, "coeffs_w", _trim(self.coeffs_w))
        object.__setattr__(self, "offset", float(self.offset))
        for c in (*self.coeffs_x, *self.coeffs_u, *self.coeffs_w, self.offset):
            if not math.isfinite(c):
                raise FormulaError("predicate coefficients must be finite")

    @classmethod
    def gt(cls, var: str, threshold: float) -> "Predicate":
        """``var > threshold`` for a 1-based identifier such as ``"x2"``."""
        kind, idx = var[0], int(var[1:]) - 1
        coeffs = [0.0] * idx + [1.0]
        return cls(**{f"coeffs_{kind}": coeffs}, offset=-threshold)

    @classmethod
    def lt(cls, var: str, threshold: float) -> "Predicate":
        kind, idx = var[0], int(var[1:]) - 1
        coeffs = [0.0] * idx + [-1.0]
        return cls(**{f"coeffs_{kind}": coeffs}, offset=threshold)

    def value(self, x, u=(), w=()) -> float:
        total = self.offset
        for coeffs, vec in ((self.coeffs_x, x), (self.coeffs_u, u), (self.coeffs_w, w)):
            if coeffs:
                if len(vec) < len(coeffs):
                    raise FormulaError(
                        f"predicate needs {len(coeffs)} components, signal has {len(vec)}"
                    )
                total += float(np.dot(coeffs, np.asarray(vec, dtype=float)[: len(coeffs)]))
        return total

    def negated(self) -> "Predicate":
        return Predicate(
            tuple(-c for c in self.coeffs_x),
            tuple(-c for c in self.coeffs_u),
            tuple(-c for c in self.coeffs_w),
            -self.offset,
        )

    def __str__(self) -> str:
        terms = []
        for kind, coeffs in (("x", self.coeffs_x), ("u", self.coeffs_u), ("w", self.coeffs_w)):
            for i, c in enumerate(coeffs):
                if c == 0.0:
                    continue
                name = f"{kind}{i + 1}"
                terms.append(name if c == 1.0 else f"{_num(c)}*{name}")
        lhs = " + ".join(terms) if terms else "0"
        return f"{lhs} > {_num(-self.offset)}"


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self) -> str:
        return f"!({self.arg})"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __init__(self, *args):
        if len(args) == 1 and isinstance(args[0], (list, tuple)):
            args = args[0]
        if not args:
            raise FormulaError("conjunction needs at least one operand")
        object.__setattr__(self, "args", tuple(args))

    def __str__(self) -> str:
        return " & ".join(f"({a})" for a in self.args)


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __init__(self, *args):
        if len(args) == 1 and isinstance(args[0], (list, tuple)):
            args = args[0]
        if not args:
            raise FormulaError("disjunction needs at least one operand")
        object.__setattr__(self, "args", tuple(args))

    def __str__(self) -> str:
        return " | ".join(f"({a})" for a in self.args)


@dataclass(frozen=True)
class Globally:
    interval: Interval
    arg: "Formula"

    def __str__(self) -> str:
        return f"G{self.interval} ({self.arg})"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    arg: "Formula"

    def __str__(self) -> str:
        return f"F{self.interval} ({self.arg})"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left}) U{self.interval} ({self.right})"


Formula = Union[Predicate, Not, And, Or, Globally, Eventually, Until]
Temporal = (Globally, Eventually, Until)


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_text(phi: Formula) -> str:
    """Concrete syntax accepted by :func:`stlmpc.parser.parse`."""
    return str(phi)


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, Predicate):
        return ()
    if isinstance(phi, Not):
        return (phi.arg,)
    if isinstance(phi, (And, Or)):
        return phi.args
    if isinstance(phi, (Globally, Eventually)):
        return (phi.arg,)
    if isinstance(phi, Until):
        return (phi.left, phi.right)
    raise TypeError(f"not a formula: {phi!r}")


def subformulas(phi: Formula) -> Iterator[Formula]:
    """Pre-order traversal, duplicates included."""
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def predicates(phi: Formula) -> list[Predicate]:
    """Distinct predicates in first-occurrence order."""
    seen: dict[Predicate, None] = {}
    for node in subformulas(phi):
        if isinstance(node, Predicate):
            seen.setdefault(node, None)
    return list(seen)


def size(phi: Formula) -> int:
    """Number of operators (non-leaf nodes)."""
    return sum(1 for node in subformulas(phi) if not isinstance(node, Predicate))


def depth(phi: Formula) -> int:
    kids = children(phi)
    return 0 if not kids else 1 + max(depth(k) for k in kids)


def dimensions(phi: Formula) -> tuple[int, int, int]:
    """Minimum (n_x, n_u, n_w) a signal needs to evaluate every predicate."""
    nx = nu = nw = 0
    for p in predicates(phi):
        nx, nu, nw = max(nx, len(p.coeffs_x)), max(nu, len(p.coeffs_u)), max(nw, len(p.coeffs_w))
    return nx, nu, nw


def uses_inputs(phi: Formula) -> bool:
    return any(p.coeffs_u for p in predicates(phi))


def is_bounded(phi: Formula) -> bool:
    return all(node.interval.bounded for node in subformulas(phi) if isinstance(node, Temporal))


def bound(phi: Formula) -> float:
    """Horizon in seconds: max over AST paths of the summed temporal upper bounds."""
    if isinstance(phi, Predicate):
        return 0.0
    if isinstance(phi, Temporal):
        if not phi.interval.bounded:
            raise UnboundedFormulaError(f"formula has an unbounded operator: {phi}")
        return phi.interval.hi + max(bound(c) for c in children(phi))
    return max(bound(c) for c in children(phi))


def is_snn(phi: Formula) -> bool:
    """Safe negation-normal fragment: atoms, negated atoms, conjunction and G only."""
    if isinstance(phi, Predicate):
        return True
    if isinstance(phi, Not):
        return isinstance(phi.arg, Predicate)
    if isinstance(phi, And):
        return all(is_snn(a) for a in phi.args)
    if isinstance(phi, Globally):
        return is_snn(phi.arg)
    return False


# Snapping tolerance in units of samples: keeps k*dt endpoints inside the window
# despite float error in the division.
STEP_TOL = 1e-9


def to_steps(interval: Interval, dt: float) -> StepInterval:
    if not dt > 0:
        raise FormulaError(f"sampling period must be positive, got {dt}")
    lo_idx = math.ceil(interval.lo / dt - STEP_TOL)
    if not interval.bounded:
        return StepInterval(lo_idx, None)
    hi_idx = math.floor(interval.hi / dt + STEP_TOL)
    if lo_idx > hi_idx:
        raise EmptyIntervalError(f"interval {interval} contains no sample at dt={dt}")
    return StepInterval(lo_idx, hi_idx)


def horizon_steps(phi: Formula, dt: float) -> int:
    """Number of samples after the evaluation point that ``phi`` can look at."""
    if isinstance(phi, Predicate):
        return 0
    if isinstance(phi, Temporal):
        steps = to_steps(phi.interval, dt)
        if steps.hi_idx is None:
            raise UnboundedFormulaError(f"formula has an unbounded operator: {phi}")
        return steps.hi_idx + max(horizon_steps(c, dt) for c in children(phi))
    return max(horizon_steps(c, dt) for c in children(phi))
