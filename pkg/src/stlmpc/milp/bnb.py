"""Best-bound branch-and-bound over the bounded simplex, plus an external backend.

Nodes are explored lowest LP bound first (ties go to the most recently created
node, so equal-bound subtrees are searched depth-first) and
branch on the most fractional binary (ties broken by lowest variable id), so a
run is fully deterministic.  Each child warm-starts from its parent's optimal
basis, after bound propagation over the rows has tightened the node's box
(see :mod:`.propagate`).  An LP solution that is integral within ``int_tol`` is *polished*: the
binaries are fixed at their rounded values and the LP is re-solved, so the
returned assignment has exactly 0/1 binaries.  If the rounded point is
infeasible at the LP tolerance (the LP was integral only within ``int_tol``),
the rounded point itself is accepted when every row holds within
``mip_feas_tol`` relative to its right-hand side; otherwise the node is
branched on like a fractional one instead of being discarded.

A diving heuristic runs at the root and then every ``dive_every`` nodes:
starting from the node's LP solution it repeatedly fixes one fractional binary
(by default the one with the largest value, fixed to 1; the other value if that
is infeasible or cannot beat the incumbent), re-propagates and re-solves, until
the LP solution is integral or both values fail.  Dives only supply incumbents; the search order
and the optimality proof are unchanged.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from . import simplex as sx
from .propagate import Propagator
from .model import MilpModel, Solution, Status


@dataclass
class SolverConfig:
    backend: str = "bnb"            # "bnb" (own solver) or "highs" (scipy.optimize.milp)
    node_limit: int = 1_000_000
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    mip_feas_tol: float = 1e-6      # row tolerance (relative to 1 + |rhs|) for rounded incumbents
    obj_tol: float = 1e-9
    bland_after: int = 1000
    time_limit: float | None = None
    record_nodes: bool = False
    propagate: bool = True          # bound propagation at every node
    dive: bool = True               # diving primal heuristic (root + every dive_every nodes)
    dive_every: int = 200
    dive_rule: str = "up"           # "up": largest fractional value -> 1; "least"/"most": by fractionality


@dataclass
class NodeRecord:
    node: int
    parent: int
    parent_bound: float
    bound: float
    status: str


def solve(model: MilpModel, config: SolverConfig | None = None) -> Solution:
    """Solve ``model`` and return a :class:`Solution` in the model's own sense."""
    config = config or SolverConfig()
    if config.backend == "bnb":
        return _branch_and_bound(model, config)
    if config.backend == "highs":
        return _solve_highs(model, config)
    raise ValueError(f"unknown backend {config.backend!r}")


def solve_relaxation(model: MilpModel, config: SolverConfig | None = None) -> Solution:
    """LP relaxation of ``model`` (binaries relaxed to ``[0, 1]``)."""
    config = config or SolverConfig()
    A, row_lo, row_hi, c, lo, hi, _ = model.arrays()
    lp = sx.BoundedSimplex(A, row_lo, row_hi, c, feas_tol=config.feas_tol, bland_after=config.bland_after)
    res = lp.solve(lo, hi)
    return _to_solution(model, res.status, res.x, res.objective, {"lp_iterations": res.iterations})


def _to_solution(model, status: str, x, min_obj: float, stats: dict) -> Solution:
    mapping = {sx.OPTIMAL: Status.OPTIMAL, sx.INFEASIBLE: Status.INFEASIBLE,
               sx.UNBOUNDED: Status.UNBOUNDED, sx.ITERATION_LIMIT: Status.ITERATION_LIMIT}
    st = mapping[status]
    if x is None:
        return Solution(st, None, math.nan, stats)
    obj = (-min_obj if model.maximize else min_obj) + model.objective_constant
    return Solution(st, np.asarray(x, dtype=float), obj, stats)


def _branch_and_bound(model: MilpModel, config: SolverConfig) -> Solution:
    t0 = time.perf_counter()
    A, row_lo, row_hi, c, lo0, hi0, is_bin = model.arrays()
    lp = sx.BoundedSimplex(A, row_lo, row_hi, c, feas_tol=config.feas_tol, bland_after=config.bland_after)
    bin_ids = np.flatnonzero(is_bin)
    stats = {"nodes": 0, "lp_iterations": 0, "binaries": int(len(bin_ids))}
    log: list[NodeRecord] = []

    prop = Propagator(A, row_lo, row_hi, is_bin, feas_tol=config.feas_tol) if config.propagate else None

    def lp_solve(fixes, basis):
        lo, hi = lo0.copy(), hi0.copy()
        for var, val in fixes:
            lo[var] = hi[var] = val
        if prop is not None:
            tightened = prop.run(lo, hi)
            if tightened is None:
                return sx.LPResult(sx.INFEASIBLE, None, math.inf, None, 0)
            lo, hi = tightened
        res = lp.solve(lo, hi, basis)
        if res.status == sx.ITERATION_LIMIT and basis is not None:
            res = lp.solve(lo, hi, None)
        stats["lp_iterations"] += res.iterations
        return res

    incumbent_x = None
    incumbent_obj = math.inf
    truncated = False

    root = lp_solve((), None)
    stats["nodes"] = 1
    if config.record_nodes:
        log.append(NodeRecord(0, -1, -math.inf, root.objective, root.status))
    if root.status == sx.UNBOUNDED:
        return _finish(model, Status.UNBOUNDED, None, math.inf, stats, log, t0)
    if root.status != sx.OPTIMAL:
        status = Status.INFEASIBLE if root.status == sx.INFEASIBLE else Status.ITERATION_LIMIT
        return _finish(model, status, None, math.inf, stats, log, t0)

    stats["dive_lps"] = 0
    row_tol = config.mip_feas_tol * (1.0 + np.maximum(np.where(np.isfinite(row_lo), np.abs(row_lo), 0.0),
                                                      np.where(np.isfinite(row_hi), np.abs(row_hi), 0.0)))

    def accept_rounded(x):
        """The LP point with binaries rounded, if it is feasible within ``mip_feas_tol``."""
        xr = np.array(x, dtype=float)
        xr[bin_ids] = np.round(xr[bin_ids])
        act = A @ xr
        if np.any(act > row_hi + row_tol) or np.any(act < row_lo - row_tol):
            return None
        stats["rounded_incumbents"] = stats.get("rounded_incumbents", 0) + 1
        return sx.LPResult(sx.OPTIMAL, xr, float(c @ xr), None, 0)

    def dive(fixes, res):
        nonlocal incumbent_x, incumbent_obj
        fixed = {j for j, _ in fixes}
        while True:
            x = res.x
            frac = np.abs(x[bin_ids] - np.round(x[bin_ids]))
            if frac.max(initial=0.0) <= config.int_tol:
                cand = _polish(lp_solve, fixes, res, bin_ids, x, accept_rounded)
                stats["dive_lps"] += 1
                if cand is not None and cand.objective < incumbent_obj:
                    incumbent_x, incumbent_obj = cand.x, cand.objective
                return
            open_ = np.flatnonzero(frac > config.int_tol)
            if config.dive_rule == "up":
                k = open_[int(np.argmax(x[bin_ids][open_]))]
            elif config.dive_rule == "least":
                k = open_[int(np.argmin(frac[open_]))]
            else:
                k = open_[int(np.argmax(frac[open_]))]
            j = int(bin_ids[k])
            if j in fixed:
                return
            fixed.add(j)
            nearest = 1.0 if config.dive_rule == "up" else float(round(x[j]))
            for val in (nearest, 1.0 - nearest):
                child = lp_solve(fixes + ((j, val),), res.basis)
                stats["dive_lps"] += 1
                if child.status == sx.OPTIMAL and child.objective < incumbent_obj:
                    fixes, res = fixes + ((j, val),), child
                    break
            else:
                return

    if config.dive and len(bin_ids):
        dive((), root)

    next_dive = config.dive_every
    counter = 0
    heap = [(_key(root.objective), 0, (), root)]
    while heap:
        _, neg_id, fixes, res = heapq.heappop(heap)
        node_id, bound = -neg_id, res.objective
        if config.dive and stats["nodes"] >= next_dive:
            next_dive += config.dive_every
            if bound < incumbent_obj:
                dive(fixes, res)
        if bound >= incumbent_obj - config.obj_tol * max(1.0, abs(incumbent_obj)):
            continue
        x = res.x
        frac = np.abs(x[bin_ids] - np.round(x[bin_ids]))
        if not len(bin_ids) or frac.max() <= config.int_tol:
            cand = _polish(lp_solve, fixes, res, bin_ids, x, accept_rounded)
            if cand is not None:
                if cand.objective < incumbent_obj:
                    incumbent_x, incumbent_obj = cand.x, cand.objective
                continue
            if not len(bin_ids) or frac.max() == 0.0:
                continue
            # integral only within tolerance and the rounded point is infeasible:
            # the subtree may still hold solutions, so branch as if fractional
            stats["polish_failures"] = stats.get("polish_failures", 0) + 1
        if stats["nodes"] >= config.node_limit or (
            config.time_limit is not None and time.perf_counter() - t0 > config.time_limit
        ):
            truncated = True
            break
        j = int(bin_ids[int(np.argmax(frac >= frac.max() - 1e-12))])
        # the child nearer the LP value is created last, so LIFO tie-breaking explores it first
        for val in (1.0, 0.0) if x[j] < 0.5 else (0.0, 1.0):
            child_fixes = fixes + ((j, val),)
            child = lp_solve(child_fixes, res.basis)
            counter += 1
            stats["nodes"] += 1
            if config.record_nodes:
                log.append(NodeRecord(counter, node_id, bound, child.objective, child.status))
            if child.status == sx.OPTIMAL:
                heapq.heappush(heap, (_key(child.objective), -counter, child_fixes, child))
            elif child.status == sx.ITERATION_LIMIT:
                truncated = True

    if truncated:
        return _finish(model, Status.ITERATION_LIMIT, incumbent_x, incumbent_obj, stats, log, t0)
    if incumbent_x is None:
        return _finish(model, Status.INFEASIBLE, None, math.inf, stats, log, t0)
    return _finish(model, Status.OPTIMAL, incumbent_x, incumbent_obj, stats, log, t0)


def _key(bound: float) -> float:
    """Heap key: bounds equal to ~1e-9 relative are ties, resolved by node id."""
    scale = max(1.0, abs(bound))
    return round(bound / scale, 9) * scale


def _polish(lp_solve, fixes, res, bin_ids, x, accept=None):
    if not len(bin_ids):
        return res
    rounded = tuple((int(j), float(round(x[j]))) for j in bin_ids)
    polished = lp_solve(rounded, res.basis)
    if polished.status != sx.OPTIMAL:
        return accept(x) if accept is not None else None
    polished.x[bin_ids] = np.round(polished.x[bin_ids])
    return polished


def _finish(model, status, x, min_obj, stats, log, t0) -> Solution:
    stats["time"] = time.perf_counter() - t0
    if log:
        stats["node_log"] = log
    if x is None:
        return Solution(status, None, math.nan, stats)
    obj = (-min_obj if model.maximize else min_obj) + model.objective_constant
    return Solution(status, np.asarray(x, dtype=float), obj, stats)


def _solve_highs(model: MilpModel, config: SolverConfig) -> Solution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    A, row_lo, row_hi, c, lo, hi, is_bin = model.arrays()
    constraints = [LinearConstraint(A, row_lo, row_hi)] if A.shape[0] else []
    options = {"mip_rel_gap": 0.0}
    if config.time_limit is not None:
        options["time_limit"] = config.time_limit
    if config.node_limit is not None:
        options["node_limit"] = config.node_limit
    res = milp(c, constraints=constraints, integrality=is_bin.astype(int),
               bounds=Bounds(lo, hi), options=options)
    stats = {"backend": "highs", "time": time.perf_counter() - t0, "message": res.message}
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        x[is_bin] = np.round(x[is_bin])
        obj = (-res.fun if model.maximize else res.fun) + model.objective_constant
        return Solution(Status.OPTIMAL, x, float(obj), stats)
    if res.status == 2:
        return Solution(Status.INFEASIBLE, None, math.nan, stats)
    if res.status == 3:
        return Solution(Status.UNBOUNDED, None, math.nan, stats)
    return Solution(Status.ITERATION_LIMIT, None if res.x is None else np.asarray(res.x), math.nan, stats)
