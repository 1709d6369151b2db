"""Mixed-binary linear program container."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp


class ModelError(ValueError):
    pass


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")


@dataclass
class Variable:
    id: int
    kind: VarKind
    lower: float
    upper: float
    name: str


@dataclass
class Constraint:
    id: int
    expr: dict[int, float]
    sense: Sense
    rhs: float
    name: str


@dataclass
class Solution:
    status: Status
    assignment: np.ndarray | None = None
    objective_value: float = math.nan
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL

    def __getitem__(self, var: int) -> float:
        if self.assignment is None:
            raise ModelError(f"no assignment available (status {self.status.value})")
        return float(self.assignment[var])

    def values(self, ids) -> np.ndarray:
        return self.assignment[np.asarray(ids, dtype=int)]


class MilpModel:
    """Variables, linear constraints and a linear objective.

    Constraints are stored as given; nothing is simplified at add time.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self.maximize = False
        self._names: set[str] = set()
        self._cnames: set[str] = set()

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_binaries(self) -> int:
        return sum(1 for v in self.variables if v.kind == VarKind.BINARY)

    def add_variable(self, kind="continuous", lo: float = 0.0, hi: float = math.inf,
                     name: str | None = None) -> int:
        try:
            kind = VarKind(kind)
        except ValueError:
            raise ModelError(f"unknown variable kind {kind!r}") from None
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ModelError(f"invalid bounds [{lo}, {hi}]")
        if kind == VarKind.BINARY and (lo < 0 or hi > 1 or lo not in (0.0, 1.0) or hi not in (0.0, 1.0)):
            raise ModelError(f"binary variable bounds must be 0 or 1, got [{lo}, {hi}]")
        vid = len(self.variables)
        name = f"v{vid}" if name is None else name
        if not _NAME_RE.match(name):
            raise ModelError(f"invalid variable name {name!r}")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        self._names.add(name)
        self.variables.append(Variable(vid, kind, lo, hi, name))
        return vid

    def add_constraint(self, expr, sense, rhs: float, name: str | None = None) -> int:
        try:
            sense = Sense(sense)
        except ValueError:
            raise ModelError(f"unknown constraint sense {sense!r}") from None
        terms: dict[int, float] = {}
        for var, coef in (expr.items() if isinstance(expr, dict) else expr):
            terms[var] = terms.get(var, 0.0) + coef
        for var in terms:
            if not (isinstance(var, (int, np.integer)) and 0 <= var < len(self.variables)):
                raise ModelError(f"constraint references unknown variable {var!r}")
        cid = len(self.constraints)
        name = f"c{cid}" if name is None else name
        if not _NAME_RE.match(name) or name in self._cnames:
            raise ModelError(f"invalid or duplicate constraint name {name!r}")
        self._cnames.add(name)
        self.constraints.append(Constraint(cid, {int(k): float(v) for k, v in terms.items()},
                                           sense, float(rhs), name))
        return cid

    def set_objective(self, expr, maximize: bool = False, constant: float = 0.0) -> None:
        expr = dict(expr)
        for var in expr:
            if not 0 <= var < len(self.variables):
                raise ModelError(f"objective references unknown variable {var!r}")
        self.objective = {int(k): float(v) for k, v in expr.items()}
        self.maximize = bool(maximize)
        self.objective_constant = float(constant)

    def set_bounds(self, var: int, lo: float, hi: float) -> None:
        v = self.variables[var]
        if lo > hi:
            raise ModelError(f"invalid bounds [{lo}, {hi}] for {v.name}")
        v.lower, v.upper = float(lo), float(hi)

    def fix(self, var: int, value: float) -> None:
        self.set_bounds(var, value, value)

    def var_by_name(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.id
        raise KeyError(name)

    # -- array views -------------------------------------------------------

    def arrays(self):
        """``(A, row_lo, row_hi, c, lo, hi, is_binary)`` with ``c`` in minimisation form."""
        n, m = len(self.variables), len(self.constraints)
        rows, cols, vals = [], [], []
        row_lo = np.full(m, -np.inf)
        row_hi = np.full(m, np.inf)
        for con in self.constraints:
            for var, coef in con.expr.items():
                if coef != 0.0:
                    rows.append(con.id)
                    cols.append(var)
                    vals.append(coef)
            if con.sense in (Sense.LE, Sense.EQ):
                row_hi[con.id] = con.rhs
            if con.sense in (Sense.GE, Sense.EQ):
                row_lo[con.id] = con.rhs
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        c = np.zeros(n)
        for var, coef in self.objective.items():
            c[var] = coef
        if self.maximize:
            c = -c
        lo = np.array([v.lower for v in self.variables])
        hi = np.array([v.upper for v in self.variables])
        is_bin = np.array([v.kind == VarKind.BINARY for v in self.variables], dtype=bool)
        return A, row_lo, row_hi, c, lo, hi, is_bin

    def objective_of(self, x) -> float:
        return self.objective_constant + sum(c * x[v] for v, c in self.objective.items())

    def violation(self, x) -> tuple[float, float]:
        """Largest (constraint-or-bound, integrality) violation of an assignment."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for v in self.variables:
            worst = max(worst, v.lower - x[v.id], x[v.id] - v.upper)
        for con in self.constraints:
            act = sum(coef * x[var] for var, coef in con.expr.items())
            if con.sense in (Sense.LE, Sense.EQ):
                worst = max(worst, act - con.rhs)
            if con.sense in (Sense.GE, Sense.EQ):
                worst = max(worst, con.rhs - act)
        integ = 0.0
        for v in self.variables:
            if v.kind == VarKind.BINARY:
                integ = max(integ, abs(x[v.id] - round(x[v.id])))
        return worst, integ

    def copy(self) -> "MilpModel":
        other = MilpModel(self.name)
        other.variables = [Variable(v.id, v.kind, v.lower, v.upper, v.name) for v in self.variables]
        other.constraints = [Constraint(c.id, dict(c.expr), c.sense, c.rhs, c.name)
                             for c in self.constraints]
        other.objective = dict(self.objective)
        other.objective_constant = self.objective_constant
        other.maximize = self.maximize
        other._names = set(self._names)
        other._cnames = set(self._cnames)
        return other
