"""Embedded MILP solver: LP relaxation plus best-first branch-and-bound."""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np

from . import _simplex
from .lp import LPWorkspace, solve_arrays
from .model import LPArrays, Model, SolveResult, SolveStats, Status


class ModelTooLarge(ValueError):
    """The model has more binaries than the solver is configured to accept."""


class IndeterminateError(RuntimeError):
    """A feasibility question could not be settled within the search limits."""


@dataclass(frozen=True)
class SolverConfig:
    max_binaries: int = 200
    node_limit: int = 20_000
    lp_iteration_limit: int = 50_000
    integrality_tol: float = 1e-6
    feasibility_tol: float = 1e-7
    objective_tol: float = 1e-8
    rounding_heuristic: bool = True

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class FeasibilityResult:
    status: Status
    values: np.ndarray | None
    stats: SolveStats

    @property
    def feasible(self) -> bool:
        if self.status is Status.ITERATION_LIMIT:
            raise IndeterminateError("feasibility undecided: search limit reached")
        return self.status is Status.FEASIBLE

    @property
    def decided(self) -> bool:
        return self.status is not Status.ITERATION_LIMIT


class MILPSolver(Protocol):
    """What the planning algorithms need from a MILP engine."""

    def solve_lp(self, model: Model) -> SolveResult: ...

    def solve_milp(self, model: Model) -> SolveResult: ...

    def check_feasible(self, model: Model) -> FeasibilityResult: ...


_LP_STATUS = {
    _simplex.OPTIMAL: Status.OPTIMAL,
    _simplex.INFEASIBLE: Status.INFEASIBLE,
    _simplex.UNBOUNDED: Status.UNBOUNDED,
    _simplex.ITERATION_LIMIT: Status.ITERATION_LIMIT,
}


class EmbeddedSolver:
    """Dense bounded simplex with best-first, most-fractional branching.

    Ties in the node bound are broken depth-first, then by creation order, so
    runs are deterministic.  Each node's LP restarts from the previous node's final dictionary
    (dual simplex when that dictionary was optimal).
    """

    def __init__(self, config: SolverConfig | None = None, backend=None):
        self.config = config or SolverConfig()
        self.backend = backend

    # LP ------------------------------------------------------------------
    def solve_lp(self, model: Model) -> SolveResult:
        """Solve the LP relaxation (binaries relaxed to [0, 1])."""
        t0 = time.perf_counter()
        lp = model.to_arrays()
        out = self._lp(lp, lp.col_lo, lp.col_hi, True)
        stats = SolveStats(pivots=out.pivots, lp_solves=1, wall_time=time.perf_counter() - t0)
        return SolveResult(_LP_STATUS[out.code], out.x, out.objective, stats)

    def _lp(self, lp, lo, hi, use_objective):
        return solve_arrays(lp, lo, hi, use_objective=use_objective,
                            max_iter=self.config.lp_iteration_limit, backend=self.backend)

    def _workspace(self, lp, use_objective):
        return LPWorkspace(lp, use_objective=use_objective,
                           max_iter=self.config.lp_iteration_limit, backend=self.backend)

    # MILP ----------------------------------------------------------------
    def solve_milp(self, model: Model) -> SolveResult:
        return self._branch_and_bound(model, feasibility=False)

    def check_feasible(self, model: Model) -> FeasibilityResult:
        res = self._branch_and_bound(model, feasibility=True)
        status = {Status.OPTIMAL: Status.FEASIBLE}.get(res.status, res.status)
        if status is Status.UNBOUNDED:
            status = Status.FEASIBLE
        if status is Status.ITERATION_LIMIT and res.values is not None:
            status = Status.FEASIBLE
        return FeasibilityResult(status, res.values, res.stats)

    def _branch_and_bound(self, model: Model, feasibility: bool) -> SolveResult:
        cfg = self.config
        if model.n_binaries > cfg.max_binaries:
            raise ModelTooLarge(
                f"{model.n_binaries} binaries exceed the configured limit of {cfg.max_binaries}")
        t0 = time.perf_counter()
        lp = model.to_arrays()
        use_obj = not feasibility
        c = lp.c if use_obj else np.zeros_like(lp.c)
        bins = lp.binaries
        stats = SolveStats()
        ws = self._workspace(lp, use_obj)

        best_x: np.ndarray | None = None
        best_obj = math.inf
        incomplete = False
        seq = 0
        # (bound, -depth, seq, lower bounds of binaries, upper bounds of binaries)
        heap = [(-math.inf, 0, seq, np.zeros(bins.size), np.ones(bins.size))]

        def prune_level():
            return best_obj - cfg.objective_tol * max(1.0, abs(best_obj))

        while heap:
            bound, neg_depth, _, blo, bhi = heapq.heappop(heap)
            if bound >= prune_level():
                continue
            if stats.nodes >= cfg.node_limit:
                incomplete = True
                break
            stats.nodes += 1
            lo = lp.col_lo.copy()
            hi = lp.col_hi.copy()
            lo[bins] = blo
            hi[bins] = bhi
            out = ws.solve(lo, hi)
            stats.pivots += out.pivots
            stats.lp_solves += 1
            if out.code == _simplex.INFEASIBLE:
                continue
            if out.code == _simplex.UNBOUNDED:
                if bins.size == 0 or stats.nodes == 1:
                    stats.wall_time = time.perf_counter() - t0
                    return SolveResult(Status.UNBOUNDED, None, None, stats)
                continue
            if out.code != _simplex.OPTIMAL:
                incomplete = True
                continue
            x, obj = out.x, out.objective
            if obj >= prune_level():
                continue
            vb = x[bins]
            frac = np.minimum(vb - np.floor(vb), np.ceil(vb) - vb)
            if frac.size == 0 or frac.max() <= cfg.integrality_tol:
                x, obj = self._polish(ws, lo, hi, x, obj, stats)
                if obj < best_obj:
                    best_x, best_obj = x, obj
                if feasibility:
                    break
                continue
            if cfg.rounding_heuristic:
                cand = self._round_up(lp, x, c)
                if cand is not None:
                    cx, cobj = cand
                    if cobj < best_obj:
                        best_x, best_obj = cx, cobj
                        if feasibility:
                            break
                        if obj >= prune_level():
                            continue
            k = int(np.argmax(frac))
            depth = -neg_depth + 1
            down_lo, down_hi = blo, bhi.copy()
            down_hi[k] = 0.0
            up_lo, up_hi = blo.copy(), bhi
            up_lo[k] = 1.0
            children = [(down_lo, down_hi), (up_lo, up_hi)]
            if vb[k] >= 0.5:
                children.reverse()
            for clo, chi in children:
                seq += 1
                heapq.heappush(heap, (obj, -depth, seq, clo, chi))

        stats.wall_time = time.perf_counter() - t0
        if best_x is None:
            status = Status.ITERATION_LIMIT if incomplete else Status.INFEASIBLE
            return SolveResult(status, None, None, stats)
        if incomplete and not feasibility:
            return SolveResult(Status.ITERATION_LIMIT, best_x, float(lp.c @ best_x), stats)
        status = Status.FEASIBLE if feasibility else Status.OPTIMAL
        return SolveResult(status, best_x, None if feasibility else float(lp.c @ best_x), stats)

    def _polish(self, ws: LPWorkspace, lo, hi, x, obj, stats):
        """Re-solve with binaries fixed at their rounded values so the returned
        assignment is exactly integral."""
        bins = ws.lp.binaries
        if bins.size == 0:
            return x, obj
        r = np.round(x[bins])
        lo, hi = lo.copy(), hi.copy()
        lo[bins] = hi[bins] = r
        out = ws.solve(lo, hi)
        stats.pivots += out.pivots
        stats.lp_solves += 1
        if out.code == _simplex.OPTIMAL and out.objective <= obj + 1e-7 * max(1.0, abs(obj)):
            return out.x, out.objective
        # the fixed re-solve failed; snapping moves rows by at most integrality_tol * |a|
        x = x.copy()
        x[bins] = r
        return x, obj

    def _round_up(self, lp: LPArrays, x, c):
        """Round every fractional binary up, keep the continuous part, and
        accept the point if all rows still hold."""
        bins = lp.binaries
        cand = x.copy()
        cand[bins] = np.where(x[bins] > self.config.integrality_tol, 1.0, 0.0)
        if np.any(cand < lp.col_lo - 1e-12) or np.any(cand > lp.col_hi + 1e-12):
            return None
        r = lp.A @ cand
        tol = self.config.feasibility_tol * 0.1
        if np.all(r >= lp.row_lo - tol) and np.all(r <= lp.row_hi + tol):
            return cand, float(c @ cand)
        return None


_default = EmbeddedSolver()


def solve_lp(model: Model, config: SolverConfig | None = None) -> SolveResult:
    return (EmbeddedSolver(config) if config else _default).solve_lp(model)


def solve_milp(model: Model, config: SolverConfig | None = None) -> SolveResult:
    return (EmbeddedSolver(config) if config else _default).solve_milp(model)


def check_feasible(model: Model, config: SolverConfig | None = None) -> FeasibilityResult:
    return (EmbeddedSolver(config) if config else _default).check_feasible(model)
