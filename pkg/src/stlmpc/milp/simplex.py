"""Bounded-variable primal simplex over sparse LU factorisations.

Problem form::

    min c.x   s.t.  row_lo <= A x <= row_hi,  lo <= x <= hi

Every row gets a logical variable ``s = A x`` carrying the row bounds, so the
working system is ``[A  -I] (x, s) = 0`` with bounds on all ``n + m`` columns.
Phase 1 minimises the sum of bound violations of the basic variables and can
start from any basis, which is how branch-and-bound children warm-start from
their parent's optimal basis.

Pricing is Dantzig's rule; after ``bland_after`` consecutive degenerate pivots
the solver switches to Bland's rule until the next non-degenerate step.  The
ratio test is Harris' two-pass test.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

AT_LOWER, AT_UPPER, FREE = 0, 1, 2

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class Basis:
    basic: np.ndarray
    state: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.basic.copy(), self.state.copy())


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    basis: Basis | None
    iterations: int


class SingularBasis(RuntimeError):
    pass


class BoundedSimplex:
    def __init__(self, A, row_lo, row_hi, c, *, feas_tol: float = 1e-9, opt_tol: float = 1e-9,
                 pivot_tol: float = 1e-9, bland_after: int = 1000, refactor_every: int = 64,
                 max_iter: int | None = None):
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        self.AT = A.T.tocsr()
        self.K = sp.hstack([A.tocsc(), -sp.identity(self.m, format="csc")], format="csc")
        self.row_lo = np.asarray(row_lo, dtype=float)
        self.row_hi = np.asarray(row_hi, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.c_full = np.concatenate([self.c, np.zeros(self.m)])
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.bland_after = bland_after
        self.refactor_every = refactor_every
        self.max_iter = max_iter if max_iter is not None else 50 * (self.m + self.n) + 1000

    # -- factor handling ------------------------------------------------------

    def _factor(self, basic: np.ndarray) -> None:
        B = self.K[:, basic]
        try:
            self._lu = splu(B.tocsc())
        except RuntimeError as exc:
            raise SingularBasis(str(exc)) from None
        self._etas: list[tuple[int, np.ndarray]] = []

    def _ftran(self, a: np.ndarray) -> np.ndarray:
        v = self._lu.solve(a)
        for r, al in self._etas:
            vr = v[r] / al[r]
            v -= vr * al
            v[r] = vr
        return v

    def _btran(self, cb: np.ndarray) -> np.ndarray:
        u = cb.astype(float, copy=True)
        for r, al in reversed(self._etas):
            u[r] = (u[r] - (u @ al - u[r] * al[r])) / al[r]
        return self._lu.solve(u, trans="T")

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        start, end = self.K.indptr[j], self.K.indptr[j + 1]
        col[self.K.indices[start:end]] = self.K.data[start:end]
        return col

    def _recompute_basics(self, x: np.ndarray, basic: np.ndarray) -> None:
        x[basic] = 0.0
        x[basic] = self._ftran(-(self.K @ x))

    # -- driver ---------------------------------------------------------------

    def slack_basis(self, lo: np.ndarray, hi: np.ndarray) -> Basis:
        state = np.full(self.n + self.m, AT_LOWER, dtype=np.int8)
        state[: self.n] = _resting_state(lo, hi)
        return Basis(np.arange(self.n, self.n + self.m), state)

    def solve(self, lo, hi, basis: Basis | None = None) -> LPResult:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi) or np.any(self.row_lo > self.row_hi):
            return LPResult(INFEASIBLE, None, np.inf, None, 0)
        if self.m == 0:
            return self._solve_unconstrained(lo, hi)
        if basis is not None:
            try:
                return self._run(lo, hi, basis.copy())
            except SingularBasis:
                pass
        return self._run(lo, hi, self.slack_basis(lo, hi))

    def _solve_unconstrained(self, lo, hi) -> LPResult:
        x = np.where(self.c > 0, lo, np.where(self.c < 0, hi, np.where(np.isfinite(lo), lo,
                     np.where(np.isfinite(hi), hi, 0.0))))
        if not np.all(np.isfinite(x)):
            return LPResult(UNBOUNDED, None, -np.inf, None, 0)
        state = _resting_state(lo, hi)
        state[(self.c < 0)] = AT_UPPER
        return LPResult(OPTIMAL, x, float(self.c @ x), Basis(np.zeros(0, dtype=int), state), 0)

    def _run(self, lo: np.ndarray, hi: np.ndarray, basis: Basis) -> LPResult:
        n, m = self.n, self.m
        lo_all = np.concatenate([lo, self.row_lo])
        hi_all = np.concatenate([hi, self.row_hi])
        basic = basis.basic.astype(int)
        state = basis.state
        is_basic = np.zeros(n + m, dtype=bool)
        is_basic[basic] = True

        # re-seat nonbasic variables on bounds that still exist
        lo_fin, hi_fin = np.isfinite(lo_all), np.isfinite(hi_all)
        state[(state == AT_LOWER) & ~lo_fin] = AT_UPPER
        state[(state == AT_UPPER) & ~hi_fin] = AT_LOWER
        state[(state == AT_LOWER) & ~lo_fin] = FREE
        state[(state == FREE) & lo_fin] = AT_LOWER
        state[(state == FREE) & hi_fin & ~lo_fin] = AT_UPPER
        x = np.where(state == AT_LOWER, lo_all, np.where(state == AT_UPPER, hi_all, 0.0))
        x[~np.isfinite(x)] = 0.0
        self._factor(basic)
        self._recompute_basics(x, basic)

        width = hi_all - lo_all
        ftol, otol, ptol = self.feas_tol, self.opt_tol, self.pivot_tol
        degenerate = 0
        it = 0
        while it < self.max_iter:
            it += 1
            xB = x[basic]
            loB, hiB = lo_all[basic], hi_all[basic]
            below = xB < loB - ftol
            above = xB > hiB + ftol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                y = self._btran(cB)
                d = np.concatenate([-(self.AT @ y), y])
            else:
                y = self._btran(self.c_full[basic])
                d = np.concatenate([self.c - self.AT @ y, y])
            d[is_basic] = 0.0
            inc = ~is_basic & (state != AT_UPPER) & (d < -otol) & (width > 0)
            dec = ~is_basic & (state != AT_LOWER) & (d > otol) & (width > 0)
            eligible = inc | dec
            if not eligible.any():
                if self._etas:
                    # confirm on a fresh factorisation before declaring the outcome
                    self._factor(basic)
                    self._recompute_basics(x, basic)
                    xB = x[basic]
                    infeasible = bool(np.any(xB < loB - ftol) or np.any(xB > hiB + ftol))
                    if infeasible != phase1:
                        continue
                if phase1:
                    return LPResult(INFEASIBLE, None, np.inf, Basis(basic, state), it)
                xs = x[:n].copy()
                return LPResult(OPTIMAL, xs, float(self.c @ xs), Basis(basic.copy(), state.copy()), it)

            bland = degenerate >= self.bland_after
            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            dirn = 1.0 if inc[q] else -1.0
            alpha = self._ftran(self._column(q))
            delta = -dirn * alpha

            # ratio test: targets per basic row given the direction of motion
            up = delta > ptol
            down = delta < -ptol
            target = np.full(m, np.nan)
            if phase1:
                target[up & below] = loB[up & below]
                target[up & ~below & ~above] = hiB[up & ~below & ~above]
                target[down & above] = hiB[down & above]
                target[down & ~below & ~above] = loB[down & ~below & ~above]
            else:
                target[up] = hiB[up]
                target[down] = loB[down]
            cand = np.isfinite(target)
            r = -1
            theta = np.inf
            if cand.any():
                idx = np.flatnonzero(cand)
                dlt = delta[idx]
                exact = (target[idx] - xB[idx]) / dlt
                if bland:
                    tmin = max(exact.min(), 0.0)
                    ties = idx[exact <= tmin + 1e-12]
                    r = int(ties[np.argmin(basic[ties])])
                    theta = max((target[r] - xB[r]) / delta[r], 0.0)
                else:
                    relaxed = (target[idx] + np.sign(dlt) * ftol - xB[idx]) / dlt
                    tmax = relaxed.min()
                    ok = exact <= tmax
                    pick = idx[ok][np.argmax(np.abs(dlt[ok]))]
                    r = int(pick)
                    theta = max((target[r] - xB[r]) / delta[r], 0.0)
            flip = width[q]
            if flip <= theta:
                theta = flip
                r = -1
            if not np.isfinite(theta):
                if phase1:
                    return LPResult(ITERATION_LIMIT, None, np.nan, None, it)
                return LPResult(UNBOUNDED, None, -np.inf, None, it)

            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            x[q] += dirn * theta
            x[basic] += delta * theta
            if r < 0:
                state[q] = AT_UPPER if dirn > 0 else AT_LOWER
                x[q] = hi_all[q] if dirn > 0 else lo_all[q]
                continue
            p = basic[r]
            if target[r] == lo_all[p]:
                state[p] = AT_LOWER
                x[p] = lo_all[p]
            else:
                state[p] = AT_UPPER
                x[p] = hi_all[p]
            basic[r] = q
            is_basic[p] = False
            is_basic[q] = True
            self._etas.append((r, alpha))
            if len(self._etas) >= self.refactor_every:
                self._factor(basic)
                self._recompute_basics(x, basic)
        return LPResult(ITERATION_LIMIT, None, np.nan, None, it)


def _resting_state(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    state = np.full(len(lo), AT_LOWER, dtype=np.int8)
    no_lo = ~np.isfinite(lo)
    state[no_lo & np.isfinite(hi)] = AT_UPPER
    state[no_lo & ~np.isfinite(hi)] = FREE
    return state
