"""Bounded-variable primal simplex kernel on a dense dictionary tableau.

Every row ``i`` of the model is turned into an equality ``a_i x - w_i = 0`` with
a logical variable ``w_i`` carrying the row bounds, so all constraints become
variable bounds.  The dictionary stores the basic variables as linear functions
of the nonbasic ones, ``v_B = T[:m] @ v_N``; row ``m`` holds the phase-2
reduced costs.  Phase 1 minimizes the sum of bound infeasibilities of the basic
variables (composite objective, recomputed every iteration).

Pricing is Dantzig's rule.  After ``bland_after`` consecutive degenerate pivots
the kernel switches to Bland's smallest-index rule until a pivot makes progress,
which rules out cycling.

The kernel mutates ``T``, ``basic``, ``nonbasic`` and ``val`` in place and can
be re-entered from any basis (the caller refactors ``T`` when needed).

A bounded dual simplex shares the dictionary.  It needs a dual feasible start
(reduced costs consistent with the bound each nonbasic variable sits at), which
is what a previously optimal basis gives after column bounds change.
"""
import types

import numpy as np

from .._accel import NUMBA_ENABLED, njit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3
NUMERICAL = 4

_BIG_INDEX = np.iinfo(np.int64).max


def _pivot_loops(T, r, j):
    rows, cols = T.shape
    inv = 1.0 / T[r, j]
    for k in range(cols):
        T[r, k] = -T[r, k] * inv
    T[r, j] = inv
    for i in range(rows):
        if i == r:
            continue
        f = T[i, j]
        if f == 0.0:
            continue
        for k in range(cols):
            T[i, k] += f * T[r, k]
        T[i, j] = f * inv


def _pivot_numpy(T, r, j):
    inv = 1.0 / T[r, j]
    row = -T[r] * inv
    row[j] = inv
    col = T[:, j].copy()
    col[r] = 0.0
    T[:, j] = 0.0
    T += np.outer(col, row)
    T[r] = row


def _simplex_impl(T, basic, nonbasic, val, lb, ub, max_iter, tol_feas, tol_opt,
            tol_piv, bland_after):
    m = basic.shape[0]
    n = nonbasic.shape[0]
    iters = 0
    pivots = 0
    degenerate = 0
    bland = False
    while True:
        if iters >= max_iter:
            return ITERATION_LIMIT, iters, pivots
        if pivots > 0 and pivots % 64 == 0:
            val[basic] = T[:m] @ val[nonbasic]

        vb = val[basic]
        lo = lb[basic]
        hi = ub[basic]
        below = vb < lo - tol_feas
        above = vb > hi + tol_feas
        phase1 = below.any() or above.any()
        if phase1:
            bad = np.nonzero(below | above)[0]
            g = np.where(above[bad], 1.0, -1.0)
            d = g @ T[bad, :]
        else:
            d = T[m].copy()

        vn = val[nonbasic]
        up = (d < -tol_opt) & (vn < ub[nonbasic])
        down = (d > tol_opt) & (vn > lb[nonbasic])
        eligible = up | down
        if not eligible.any():
            if phase1:
                return INFEASIBLE, iters, pivots
            return OPTIMAL, iters, pivots
        if bland:
            j = np.argmin(np.where(eligible, nonbasic, _BIG_INDEX))
        else:
            j = np.argmax(np.where(eligible, np.abs(d), -1.0))
        s = 1.0 if d[j] < 0.0 else -1.0
        q = nonbasic[j]

        a = s * T[:m, j]
        lim = np.full(m, np.inf)
        rising = (a > tol_piv) & ~above
        falling = (a < -tol_piv) & ~below
        target_up = np.where(below, lo, hi)
        target_down = np.where(above, hi, lo)
        lim[rising] = (target_up[rising] - vb[rising]) / a[rising]
        lim[falling] = (target_down[falling] - vb[falling]) / a[falling]
        lim = np.maximum(lim, 0.0)

        # distance to the opposite bound (a warm start can leave val[q] inside)
        flip = ub[q] - val[q] if s > 0.0 else val[q] - lb[q]
        theta = lim.min() if m > 0 else np.inf
        if theta == np.inf and flip == np.inf:
            if phase1:
                return NUMERICAL, iters, pivots
            return UNBOUNDED, iters, pivots
        iters += 1

        if flip <= theta:
            val[q] = ub[q] if s > 0.0 else lb[q]
            val[basic] = vb + flip * a
            degenerate = 0
            bland = False
            continue

        ties = lim <= theta + 1e-12 * max(1.0, theta)
        if bland:
            r = np.argmin(np.where(ties, basic, _BIG_INDEX))
        else:
            r = np.argmax(np.where(ties, np.abs(a), -1.0))
        if not ties[r]:
            # theta is NaN: the dictionary has gone bad
            return NUMERICAL, iters, pivots
        leaving = basic[r]
        if a[r] > 0.0:
            bound = lo[r] if below[r] else hi[r]
        else:
            bound = hi[r] if above[r] else lo[r]

        val[basic] = vb + theta * a
        val[q] = val[q] + s * theta
        val[leaving] = bound
        _pivot(T, r, j)
        basic[r] = q
        nonbasic[j] = leaving
        pivots += 1

        if theta <= 1e-12:
            degenerate += 1
            if degenerate > bland_after:
                bland = True
        else:
            degenerate = 0
            bland = False



def _dual_impl(T, basic, nonbasic, val, lb, ub, max_iter, tol_feas, tol_opt, tol_piv):
    m = basic.shape[0]
    iters = 0
    pivots = 0
    while True:
        if iters >= max_iter:
            return ITERATION_LIMIT, iters, pivots
        if pivots > 0 and pivots % 64 == 0:
            val[basic] = T[:m] @ val[nonbasic]
        vb = val[basic]
        lo = lb[basic]
        hi = ub[basic]
        infeas = np.maximum(lo - vb, 0.0) + np.maximum(vb - hi, 0.0)
        if m == 0:
            return OPTIMAL, iters, pivots
        r = np.argmax(infeas)
        if infeas[r] <= tol_feas:
            return OPTIMAL, iters, pivots
        below = vb[r] < lo[r]
        direction = 1.0 if below else -1.0
        row = T[r] * direction
        d = T[m]
        vn = val[nonbasic]
        can_up = vn < ub[nonbasic]
        can_down = vn > lb[nonbasic]
        up_ok = can_up & (row > tol_piv)
        down_ok = can_down & (row < -tol_piv)
        eligible = up_ok | down_ok
        if not eligible.any():
            return INFEASIBLE, iters, pivots
        absrow = np.abs(row)
        sd = np.maximum(np.where(up_ok, d, -d), 0.0)
        # Harris two-pass ratio test
        bound = np.where(eligible, (sd + tol_opt) / np.where(eligible, absrow, 1.0), np.inf)
        theta_max = bound.min()
        cand = eligible & (sd <= theta_max * absrow)
        q = np.argmax(np.where(cand, absrow, -1.0))
        if not cand[q]:
            return NUMERICAL, iters, pivots

        target = lo[r] if below else hi[r]
        step = (target - vb[r]) / T[r, q]
        entering = nonbasic[q]
        leaving = basic[r]
        val[basic] = vb + T[:m, q] * step
        val[entering] = val[entering] + step
        val[leaving] = target
        _pivot(T, r, q)
        basic[r] = entering
        nonbasic[q] = leaving
        pivots += 1
        iters += 1


def _bind(fn, pivot):
    # same code object, different pivot global: the pure-numpy twin of a kernel
    g = dict(fn.__globals__, _pivot=pivot)
    return types.FunctionType(fn.__code__, g, fn.__name__, fn.__defaults__)


simplex_numpy = _bind(_simplex_impl, _pivot_numpy)
dual_numpy = _bind(_dual_impl, _pivot_numpy)
if NUMBA_ENABLED:
    # module-level globals (not closures) so numba can cache the compiled code
    _pivot = njit(_pivot_loops)
    simplex_numba = njit(_simplex_impl)
    dual_numba = njit(_dual_impl)
    simplex, dual = simplex_numba, dual_numba
else:
    _pivot = _pivot_numpy
    simplex_numba = dual_numba = None
    simplex, dual = simplex_numpy, dual_numpy
