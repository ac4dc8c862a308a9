"""Numba vs pure-numpy simplex kernels.

    python3 benchmarks/bench_simplex.py [--sizes 20,60,120] [--reps 5]

Times cold LP solves on random dense LPs and one branch-and-bound run on an
avoidance model, for both backends, after a warm-up call that absorbs JIT
compilation.  Objectives are compared so a speedup never hides a wrong answer.
"""
import argparse
import time

import numpy as np

from itermilp.bench import InstanceParams, random_instance
from itermilp.formulations import build_avoidance_problem
from itermilp.algorithms import uniform_grid_times
from itermilp.milp import EmbeddedSolver, SolverConfig
from itermilp.milp.lp import NUMBA, NUMPY, solve_arrays
from itermilp.milp.model import LPArrays


def random_lp(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(-1, 1, n)
    r = A @ x0
    return LPArrays(
        A=A,
        row_lo=r - rng.uniform(0.1, 1.0, m),
        row_hi=r + rng.uniform(0.1, 1.0, m),
        col_lo=np.full(n, -5.0),
        col_hi=np.full(n, 5.0),
        c=rng.normal(size=n),
        binaries=np.zeros(0, dtype=np.int64),
    )


def best_of(fn, reps):
    best = np.inf
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_lp(sizes, reps):
    print(f"{'m x n':>10} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'|dobj|':>9}")
    for s in sizes:
        lp = random_lp(s, s, seed=s)
        for b in (NUMPY, NUMBA):
            solve_arrays(lp, backend=b)
        t_np, r_np = best_of(lambda: solve_arrays(lp, backend=NUMPY), reps)
        t_nb, r_nb = best_of(lambda: solve_arrays(lp, backend=NUMBA), reps)
        d = abs(r_np.objective - r_nb.objective)
        print(f"{s:>4} x {s:<4} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f} {d:9.1e}")


def bench_milp(reps):
    problem = random_instance(InstanceParams(n_obst=2), seed=1)
    times = uniform_grid_times(problem.t_f, 0.5, 2)
    model = build_avoidance_problem(problem, times).model
    res = {}
    for b in (NUMPY, NUMBA):
        solver = EmbeddedSolver(SolverConfig(max_binaries=10_000), backend=b)
        solver.solve_milp(model)
        res[b.name] = best_of(lambda: solver.solve_milp(model), reps)
    (t_np, r_np), (t_nb, r_nb) = res["numpy"], res["numba"]
    print(f"\navoidance MILP ({model.n_binaries} binaries, {r_nb.stats.nodes} nodes)")
    print(f"  numpy {t_np:.3f} s   numba {t_nb:.3f} s   speedup {t_np / t_nb:.1f}x"
          f"   |dobj| {abs(r_np.objective - r_nb.objective):.1e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="20,60,120")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--skip-milp", action="store_true")
    args = ap.parse_args()
    if NUMBA is None:
        raise SystemExit("numba backend disabled (unset ITERMILP_DISABLE_NUMBA)")
    bench_lp([int(s) for s in args.sizes.split(",")], args.reps)
    if not args.skip_milp:
        bench_milp(max(1, args.reps // 2))


if __name__ == "__main__":
    main()
