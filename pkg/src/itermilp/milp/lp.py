"""LP driver around the simplex kernels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _simplex
from .model import LPArrays

TOL_FEAS = 1e-9
TOL_OPT = 1e-9
TOL_PIV = 1e-9
# the dual ratio test picks among small entries too, so it needs a firmer floor
TOL_PIV_DUAL = 1e-7
BLAND_AFTER = 50
MAX_REFACTOR = 3
WARM_MIN_BUDGET = 2_000
WARM_BUDGET_FACTOR = 10


@dataclass
class LPOutcome:
    code: int
    x: np.ndarray | None
    objective: float | None
    pivots: int
    iterations: int


def _crash_kernel(A, row_lo, row_hi, x, col_hi, boxed):
    r = A @ x
    for j in boxed:
        step = col_hi[j] - x[j]
        gain = 0.0
        for i in range(A.shape[0]):
            a = A[i, j]
            if a == 0.0:
                continue
            old = max(row_lo[i] - r[i], 0.0) + max(r[i] - row_hi[i], 0.0)
            new_r = r[i] + a * step
            new = max(row_lo[i] - new_r, 0.0) + max(new_r - row_hi[i], 0.0)
            gain += old - new
        if gain > 1e-12:
            for i in range(A.shape[0]):
                r[i] += A[i, j] * step
            x[j] = col_hi[j]
    return x


def _crash_numpy(A, row_lo, row_hi, x, col_hi, boxed):
    r = A @ x
    for j in boxed:
        step = col_hi[j] - x[j]
        rows = np.flatnonzero(A[:, j])
        old_r = r[rows]
        new_r = old_r + A[rows, j] * step
        lo, hi = row_lo[rows], row_hi[rows]
        old = np.maximum(lo - old_r, 0.0) + np.maximum(old_r - hi, 0.0)
        new = np.maximum(lo - new_r, 0.0) + np.maximum(new_r - hi, 0.0)
        if old.sum() - new.sum() > 1e-12:
            r[rows] = new_r
            x[j] = col_hi[j]
    return x


@dataclass(frozen=True)
class Backend:
    """The three hot kernels of one execution path."""

    name: str
    primal: Callable
    dual: Callable
    crash: Callable


NUMPY = Backend("numpy", _simplex.simplex_numpy, _simplex.dual_numpy, _crash_numpy)
if _simplex.NUMBA_ENABLED:
    NUMBA = Backend("numba", _simplex.simplex_numba, _simplex.dual_numba, _simplex.njit(_crash_kernel))
    DEFAULT = NUMBA
else:
    NUMBA = None
    DEFAULT = NUMPY


def get_backend(name: "str | Backend | None" = None) -> Backend:
    """``None`` gives the active default (numba unless disabled by the env flag)."""
    if name is None:
        return DEFAULT
    if isinstance(name, Backend):
        return name
    if name == "numpy":
        return NUMPY
    if name == "numba":
        if NUMBA is None:
            raise ValueError("numba backend unavailable (not installed or disabled)")
        return NUMBA
    raise ValueError(f"unknown backend {name!r}")


def initial_point(lp: LPArrays, col_lo: np.ndarray, col_hi: np.ndarray, backend=None) -> np.ndarray:
    """Nonbasic starting values: the finite bound, zero for free columns.

    Boxed columns start at whichever bound leaves less total row
    infeasibility (a greedy one-pass crash)."""
    x = np.where(np.isfinite(col_lo), col_lo, np.where(np.isfinite(col_hi), col_hi, 0.0))
    boxed = np.flatnonzero(np.isfinite(col_lo) & np.isfinite(col_hi) & (col_hi > col_lo))
    if boxed.size == 0 or lp.A.shape[0] == 0:
        return x
    return get_backend(backend).crash(lp.A, lp.row_lo, lp.row_hi, x, col_hi, boxed)


def _refactor(A, basic, nonbasic, cost, T, val):
    m, n = A.shape
    full = np.hstack([A, -np.eye(m)])
    B = full[:, basic]
    N = full[:, nonbasic]
    T[:m] = -np.linalg.solve(B, N)
    val[basic] = T[:m] @ val[nonbasic]
    T[m] = cost[nonbasic] + cost[basic] @ T[:m]


def solve_arrays(lp: LPArrays, col_lo=None, col_hi=None, *, use_objective: bool = True,
                 max_iter: int = 50_000, backend=None) -> LPOutcome:
    """Solve ``min c x`` over the box/row form of ``lp`` from a cold start.

    ``col_lo``/``col_hi`` override the column bounds (branch-and-bound nodes)."""
    ws = LPWorkspace(lp, use_objective=use_objective, max_iter=max_iter, backend=backend)
    return ws.solve(col_lo, col_hi)


class LPWorkspace:
    """Re-solves one LP under changing column bounds.

    After an optimal solve the final dictionary stays dual feasible when only
    column bounds change, so the next call starts with the dual simplex and
    finishes with a primal pass.  Otherwise the primal simplex restarts from
    the last dictionary with nonbasic values clipped into the new bounds.  The
    dictionary is rebuilt every ``refactor_every`` pivots and whenever a result
    fails the residual check."""

    def __init__(self, lp: LPArrays, *, use_objective: bool = True, max_iter: int = 50_000,
                 backend=None, refactor_every: int = 5_000):
        self.lp = lp
        self.backend = get_backend(backend)
        self.max_iter = max_iter
        self.refactor_every = refactor_every
        m, n = lp.A.shape
        self.m, self.n = m, n
        c = lp.c if use_objective else np.zeros(n)
        self.c = np.asarray(c, dtype=np.float64)
        self.cost = np.concatenate([self.c, np.zeros(m)])
        self.lb = np.concatenate([lp.col_lo, lp.row_lo]).astype(np.float64)
        self.ub = np.concatenate([lp.col_hi, lp.row_hi]).astype(np.float64)
        self.T = np.empty((m + 1, n))
        self.basic = np.arange(n, n + m, dtype=np.int64)
        self.nonbasic = np.arange(n, dtype=np.int64)
        self.val = np.zeros(n + m)
        self._ready = False
        self._dual_ok = False
        self._since_factor = 0

    def _cold(self, col_lo, col_hi):
        m, n = self.m, self.n
        A = self.lp.A
        self.basic[:] = np.arange(n, n + m)
        self.nonbasic[:] = np.arange(n)
        self.T[:m] = A
        self.T[m] = self.c
        self.val[:n] = initial_point(self.lp, col_lo, col_hi, self.backend)
        self.val[n:] = A @ self.val[:n]
        self._since_factor = 0
        self._ready = True

    def _refactor(self):
        _refactor(self.lp.A, self.basic, self.nonbasic, self.cost, self.T, self.val)
        self._since_factor = 0

    def _place_nonbasic(self) -> bool:
        """Put nonbasic columns at the bound their reduced cost asks for.

        Returns whether the start is dual feasible."""
        nb = self.nonbasic
        lo, hi = self.lb[nb], self.ub[nb]
        v = np.clip(self.val[nb], lo, hi)
        dual_ok = self._dual_ok
        if dual_ok:
            d = self.T[self.m]
            placed = np.where(d > TOL_OPT, lo, np.where(d < -TOL_OPT, hi, v))
            if np.all(np.isfinite(placed)):
                v = placed
            else:
                dual_ok = False
        self.val[nb] = v
        if self._since_factor >= self.refactor_every:
            try:
                self._refactor()
            except np.linalg.LinAlgError:
                self._ready = False
                return False
        else:
            self.val[self.basic] = self.T[:self.m] @ v
        return dual_ok

    def _run(self, kernel, budget):
        b = self.backend
        if kernel == "dual":
            code, it, pv = b.dual(self.T, self.basic, self.nonbasic, self.val, self.lb, self.ub,
                                  budget, TOL_FEAS, TOL_OPT, TOL_PIV_DUAL)
        else:
            code, it, pv = b.primal(self.T, self.basic, self.nonbasic, self.val, self.lb, self.ub,
                                    budget, TOL_FEAS, TOL_OPT, TOL_PIV, BLAND_AFTER)
        self._since_factor += pv
        return code, it, pv

    def solve(self, col_lo=None, col_hi=None) -> LPOutcome:
        lp, n = self.lp, self.n
        col_lo = np.asarray(lp.col_lo if col_lo is None else col_lo, dtype=np.float64)
        col_hi = np.asarray(lp.col_hi if col_hi is None else col_hi, dtype=np.float64)
        if np.any(col_lo > col_hi):
            return LPOutcome(_simplex.INFEASIBLE, None, None, 0, 0)
        self.lb[:n] = col_lo
        self.ub[:n] = col_hi
        pivots = iters = 0
        warm = self._ready
        if warm:
            # a warm start that stalls is abandoned early for a cold one
            budget = min(self.max_iter, max(WARM_MIN_BUDGET, WARM_BUDGET_FACTOR * (self.m + n)))
            if self._place_nonbasic():
                code, iters, pivots = self._run("dual", budget)
                if code == _simplex.INFEASIBLE:
                    # a row that no bound choice can repair; the basis stays dual feasible
                    return LPOutcome(code, None, None, pivots, iters)
                if code != _simplex.OPTIMAL:
                    warm = self._ready = False
        if warm and self._ready:
            code, it, pv = self._primal(budget - iters, col_lo, col_hi)
            iters += it
            pivots += pv
            if code in (_simplex.UNBOUNDED, _simplex.ITERATION_LIMIT, _simplex.NUMERICAL):
                # drift in a long-lived dictionary can fake these; only a cold start may report them
                self._ready = False
        if not self._ready:
            self._cold(col_lo, col_hi)
            code, it, pv = self._primal(self.max_iter, col_lo, col_hi)
            iters += it
            pivots += pv

        self._dual_ok = code == _simplex.OPTIMAL
        if code == _simplex.NUMERICAL:
            code = _simplex.ITERATION_LIMIT
            self._ready = False
        if code != _simplex.OPTIMAL:
            return LPOutcome(code, None, None, pivots, iters)
        # basic values carry roundoff; a fixed column must come back exactly at its bound
        x = np.clip(self.val[:n], col_lo, col_hi)
        return LPOutcome(code, x, float(self.c @ x), pivots, iters)

    def _primal(self, budget, col_lo, col_hi):
        """Primal simplex from the current dictionary, refactoring (then
        restarting cold once) when the result fails the residual check."""
        lp, n = self.lp, self.n
        iters = pivots = 0
        cold_retry = False
        attempt = 0
        while True:
            code, it, pv = self._run("primal", max(budget - iters, 0))
            iters += it
            pivots += pv
            bad = code == _simplex.NUMERICAL or (
                code == _simplex.OPTIMAL and not _consistent(lp.A, self.val, self.lb, self.ub, n))
            if not bad:
                return code, iters, pivots
            attempt += 1
            if attempt <= MAX_REFACTOR:
                try:
                    self._refactor()
                    continue
                except np.linalg.LinAlgError:
                    pass
            if cold_retry:
                return _simplex.NUMERICAL, iters, pivots
            cold_retry = True
            attempt = 0
            self._cold(col_lo, col_hi)


def _consistent(A, val, lb, ub, n, tol=1e-9):
    x = val[:n]
    r = A @ x
    scale = 1.0 + np.abs(A).sum(axis=1) * max(1.0, float(np.max(np.abs(x), initial=0.0)))
    ok_rows = np.all(r >= lb[n:] - tol * scale) and np.all(r <= ub[n:] + tol * scale)
    ok_cols = np.all(x >= lb[:n] - tol) and np.all(x <= ub[:n] + tol)
    return bool(ok_rows and ok_cols)
