"""Node-level bound propagation over linear rows.

For each row ``row_lo <= a.x <= row_hi`` the minimum and maximum activity of
the other terms give implied bounds on every variable.  Binary bounds are
rounded to integers, which is what lets a chain of min/max gadgets with known
operands collapse without branching.

A second, disjunctive step looks at partition rows ``sum_{i in S} p_i = 1``
over binaries.  Each row that contains exactly one such ``p_i`` implies bounds
on its continuous variables when ``p_i = 1``; since some live member of ``S``
is 1, a continuous variable is bounded by the hull of the bounds implied by
the live members.  This resolves ties in min/max selector gadgets, where the
plain row step leaves the selected side of the gadget unbounded.  The model itself is never modified;
propagation only narrows the bounds handed to the LP at a node, so every
bound it derives is implied by the node's constraints.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

_BIN_TOL = 1e-6
_MIN_GAIN = 1e-7


class Propagator:
    def __init__(self, A, row_lo, row_hi, is_bin, *, feas_tol: float = 1e-7, max_passes: int = 100):
        coo = sp.coo_matrix(A)
        keep = coo.data != 0
        self.rows = coo.row[keep]
        self.cols = coo.col[keep]
        self.vals = coo.data[keep].astype(float)
        self.m, self.n = A.shape
        self.row_lo = np.asarray(row_lo, dtype=float)
        self.row_hi = np.asarray(row_hi, dtype=float)
        self.is_bin = np.asarray(is_bin, dtype=bool)
        self.feas_tol = feas_tol
        self.max_passes = max_passes
        self._pos = self.vals > 0
        self._setup_partitions()

    def _setup_partitions(self) -> None:
        rows, cols, vals = self.rows, self.cols, self.vals
        order = np.argsort(rows, kind="stable")
        starts = np.searchsorted(rows[order], np.arange(self.m + 1))
        group_of = {}
        for i in range(self.m):
            ent = order[starts[i]:starts[i + 1]]
            if len(ent) < 2 or self.row_lo[i] != 1.0 or self.row_hi[i] != 1.0:
                continue
            if np.all(self.is_bin[cols[ent]]) and np.all(vals[ent] == 1.0):
                g = len(set(group_of.values()))
                for e in ent:
                    group_of.setdefault(int(cols[e]), g)
        self._groups = len(set(group_of.values()))
        trip_x, trip_p, px_index = [], [], {}
        px_p, px_x = [], []
        for i in range(self.m):
            ent = order[starts[i]:starts[i + 1]]
            bins = [e for e in ent if self.is_bin[cols[e]]]
            if len(bins) != 1 or int(cols[bins[0]]) not in group_of:
                continue
            pe = bins[0]
            if self.row_lo[i] == 1.0 and self.row_hi[i] == 1.0 and len(ent) == 1:
                continue
            for e in ent:
                if e == pe:
                    continue
                key = (int(cols[pe]), int(cols[e]))
                if key not in px_index:
                    px_index[key] = len(px_p)
                    px_p.append(key[0])
                    px_x.append(key[1])
                trip_x.append(e)
                trip_p.append(pe)
        self._trip_x = np.array(trip_x, dtype=int)
        self._trip_p = np.array(trip_p, dtype=int)
        self._trip_px = np.array([px_index[(int(cols[p]), int(cols[x]))] for p, x in zip(trip_p, trip_x)],
                                 dtype=int)
        self._px_p = np.array(px_p, dtype=int)
        self._px_x = np.array(px_x, dtype=int)
        keys = {}
        px_key = []
        for p, x in zip(px_p, px_x):
            k = (group_of[p], x)
            if k not in keys:
                keys[k] = len(keys)
            px_key.append(keys[k])
        self._px_key = np.array(px_key, dtype=int)
        self._key_g = np.array([g for g, _ in keys], dtype=int)
        self._key_x = np.array([x for _, x in keys], dtype=int)
        members = np.full(self.n, -1, dtype=int)
        for v, g in group_of.items():
            members[v] = g
        self._member_group = members

    def _row_sums(self, contrib: np.ndarray):
        inf = ~np.isfinite(contrib)
        n_inf = np.bincount(self.rows, weights=inf, minlength=self.m)
        fin = np.bincount(self.rows, weights=np.where(inf, 0.0, contrib), minlength=self.m)
        return inf, n_inf, fin

    def _residual(self, contrib, inf, n_inf, fin, fill):
        r = self.rows
        out = np.where(inf, np.where(n_inf[r] == 1, fin[r], fill),
                       np.where(n_inf[r] == 0, fin[r] - contrib, fill))
        return out

    def run(self, lo: np.ndarray, hi: np.ndarray):
        """Tightened ``(lo, hi)``, or ``None`` if the node is proven infeasible."""
        lo = lo.astype(float, copy=True)
        hi = hi.astype(float, copy=True)
        if not len(self.vals):
            return (lo, hi) if np.all(lo <= hi + self.feas_tol) else None
        rows, cols, vals, pos = self.rows, self.cols, self.vals, self._pos
        rlo, rhi = self.row_lo[rows], self.row_hi[rows]
        tol = self.feas_tol
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            for _ in range(self.max_passes):
                lj, hj = lo[cols], hi[cols]
                cmin = np.where(pos, vals * lj, vals * hj)
                cmax = np.where(pos, vals * hj, vals * lj)
                inf_a, ninf_a, fin_a = self._row_sums(cmin)
                inf_b, ninf_b, fin_b = self._row_sums(cmax)
                minact = np.where(ninf_a == 0, fin_a, -np.inf)
                maxact = np.where(ninf_b == 0, fin_b, np.inf)
                scale = 1.0 + np.abs(self.row_lo) * np.isfinite(self.row_lo) \
                    + np.abs(self.row_hi) * np.isfinite(self.row_hi)
                if np.any(minact > self.row_hi + tol * scale) or np.any(maxact < self.row_lo - tol * scale):
                    return None
                res_min = self._residual(cmin, inf_a, ninf_a, fin_a, -np.inf)
                res_max = self._residual(cmax, inf_b, ninf_b, fin_b, np.inf)
                # a x <= row_hi - res_min ;  a x >= row_lo - res_max
                up = (rhi - res_min) / vals
                dn = (rlo - res_max) / vals
                new_hi_c = np.where(pos, up, dn)
                new_lo_c = np.where(pos, dn, up)
                new_hi = hi.copy()
                new_lo = lo.copy()
                ok = np.isfinite(new_hi_c)
                np.minimum.at(new_hi, cols[ok], new_hi_c[ok])
                ok = np.isfinite(new_lo_c)
                np.maximum.at(new_lo, cols[ok], new_lo_c[ok])
                if len(self._trip_x):
                    self._disjunctive(lo, hi, new_lo, new_hi, cmin, cmax, inf_a, ninf_a, fin_a,
                                      inf_b, ninf_b, fin_b)
                b = self.is_bin
                new_hi[b] = np.floor(new_hi[b] + _BIN_TOL)
                new_lo[b] = np.ceil(new_lo[b] - _BIN_TOL)
                c = ~b
                # keep a small safety margin on continuous bounds
                new_hi[c] += 1e-9 * np.maximum(1.0, np.abs(new_hi[c]))
                new_lo[c] -= 1e-9 * np.maximum(1.0, np.abs(new_lo[c]))
                gain_hi = hi - new_hi
                gain_lo = new_lo - lo
                width = np.maximum(1.0, np.where(np.isfinite(hi - lo), hi - lo, 1.0))
                tighten_hi = gain_hi > _MIN_GAIN * width
                tighten_lo = gain_lo > _MIN_GAIN * width
                if not (tighten_hi.any() or tighten_lo.any()):
                    break
                hi = np.where(tighten_hi, new_hi, hi)
                lo = np.where(tighten_lo, new_lo, lo)
                bad = lo > hi
                if bad.any():
                    gap = lo - hi
                    if np.any(gap[bad] > tol * np.maximum(1.0, np.abs(lo[bad]))):
                        return None
                    mid = 0.5 * (lo + hi)
                    lo = np.where(bad, mid, lo)
                    hi = np.where(bad, mid, hi)
        return lo, hi

    def _disjunctive(self, lo, hi, new_lo, new_hi, cmin, cmax, inf_a, ninf_a, fin_a,
                     inf_b, ninf_b, fin_b) -> None:
        ex, ep = self._trip_x, self._trip_p
        vals, rows = self.vals, self.rows
        r = rows[ex]
        # residual activity of the row without x, with the indicator fixed at 1
        res_min = self._residual(cmin, inf_a, ninf_a, fin_a, -np.inf)[ex] - cmin[ep] + vals[ep]
        res_max = self._residual(cmax, inf_b, ninf_b, fin_b, np.inf)[ex] - cmax[ep] + vals[ep]
        a = vals[ex]
        up = (self.row_hi[r] - res_min) / a
        dn = (self.row_lo[r] - res_max) / a
        imp_hi = np.where(a > 0, up, dn)
        imp_lo = np.where(a > 0, dn, up)
        npx = len(self._px_p)
        h_hi = np.full(npx, np.inf)
        h_lo = np.full(npx, -np.inf)
        ok = ~np.isnan(imp_hi)
        np.minimum.at(h_hi, self._trip_px[ok], imp_hi[ok])
        ok = ~np.isnan(imp_lo)
        np.maximum.at(h_lo, self._trip_px[ok], imp_lo[ok])
        # implied bounds never loosen the current box of x
        h_hi = np.minimum(h_hi, hi[self._px_x])
        h_lo = np.maximum(h_lo, lo[self._px_x])
        live = hi[self._px_p] > 0.5
        nkeys = len(self._key_g)
        live_members = np.bincount(self._member_group[self._member_group >= 0],
                                   weights=(hi > 0.5)[self._member_group >= 0], minlength=self._groups)
        cover = np.bincount(self._px_key, weights=live, minlength=nkeys)
        full = cover == live_members[self._key_g]
        k_hi = np.full(nkeys, -np.inf)
        k_lo = np.full(nkeys, np.inf)
        np.maximum.at(k_hi, self._px_key[live], h_hi[live])
        np.minimum.at(k_lo, self._px_key[live], h_lo[live])
        sel = full & np.isfinite(k_hi)
        np.minimum.at(new_hi, self._key_x[sel], k_hi[sel])
        sel = full & np.isfinite(k_lo)
        np.maximum.at(new_lo, self._key_x[sel], k_lo[sel])
