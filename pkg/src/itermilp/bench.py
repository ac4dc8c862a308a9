"""Random instances and the average-case effort study (uniform gridding vs the
iterative algorithms)."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import algorithms as alg
from .dynamics import State, max_speed
from .formulations import Obstacle, Problem
from .milp import EmbeddedSolver, FeasibilityResult, Model, SolveResult, SolverConfig

METHODS = ("uniform-dtc", "uniform-2dtmin", "iter-times", "grow")
CSV_HEADER = ("seed", "method", "n_obst", "n_avoid_times", "nodes", "pivots", "wall_ms", "success")


def _interval(name, lo_hi):
    lo, hi = (float(v) for v in lo_hi)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ValueError(f"{name} interval {lo_hi} is empty or not finite")
    return lo, hi


@dataclass(frozen=True)
class InstanceParams:
    r_v: tuple[float, float] = (0.5, 1.0)
    R_obst: tuple[float, float] = (0.2, 0.3)
    r: tuple[float, float] = (0.0, 1.0)
    start_xy: tuple[float, float] = (-0.8, -0.8)
    finish_xy: tuple[float, float] = (1.0, 1.0)
    R_s: float = 0.5
    R_f: float = 0.1
    n_obst: int = 3
    t_f: float = 6.0
    N_u: int = 10
    M_u: int = 10
    M_o: int = 10
    seed: int = 0
    max_draws: int = 100_000

    def __post_init__(self):
        for name in ("r_v", "R_obst", "r"):
            object.__setattr__(self, name, _interval(name, getattr(self, name)))
        if self.R_obst[0] <= 0:
            raise ValueError("obstacle radii must be positive")
        if not (self.R_s > 0 and self.R_f > 0):
            raise ValueError("exclusion radii must be positive")
        if self.n_obst < 0:
            raise ValueError("n_obst must be >= 0")
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")

    def replace(self, **kw) -> "InstanceParams":
        return replace(self, **kw)


def _angle(rng) -> float:
    # uniform on (0, 2*pi]
    return 2.0 * math.pi - rng.uniform(0.0, 2.0 * math.pi)


def random_instance(params: InstanceParams, seed: int | None = None) -> Problem:
    """Start speed and heading, then obstacles by rejection so none overlaps
    the start or finish exclusion circle."""
    seed = params.seed if seed is None else seed
    rng = np.random.default_rng([int(seed), params.n_obst])
    r_v = rng.uniform(*params.r_v)
    th_v = _angle(rng)
    start = State(*params.start_xy, r_v * math.cos(th_v), r_v * math.sin(th_v))
    finish = State(*params.finish_xy, 0.0, 0.0)
    s, f = np.array(params.start_xy), np.array(params.finish_xy)
    obstacles = []
    draws = 0
    while len(obstacles) < params.n_obst:
        if draws >= params.max_draws:
            raise ValueError(f"no valid obstacle layout after {draws} draws; parameters over-constrained")
        draws += 1
        R = rng.uniform(*params.R_obst)
        r = rng.uniform(*params.r)
        th = _angle(rng)
        c = np.array([r * math.cos(th), r * math.sin(th)])
        if np.hypot(*(c - s)) <= R + params.R_s or np.hypot(*(c - f)) <= R + params.R_f:
            continue
        obstacles.append(Obstacle((float(c[0]), float(c[1])), float(R)))
    return Problem(start, finish, params.t_f, params.N_u, params.M_u, params.M_o, tuple(obstacles))


class BudgetedSolver:
    """Wraps an embedded solver so that all solves together share one node budget."""

    def __init__(self, config: SolverConfig, node_budget: int, backend=None):
        self.config = config
        self.remaining = int(node_budget)
        self.backend = backend

    def _inner(self) -> EmbeddedSolver:
        return EmbeddedSolver(self.config.with_(node_limit=max(self.remaining, 0)), self.backend)

    def _charge(self, res):
        self.remaining -= res.stats.nodes
        return res

    def solve_lp(self, model: Model) -> SolveResult:
        return self._inner().solve_lp(model)

    def solve_milp(self, model: Model) -> SolveResult:
        return self._charge(self._inner().solve_milp(model))

    def check_feasible(self, model: Model) -> FeasibilityResult:
        return self._charge(self._inner().check_feasible(model))


@dataclass(frozen=True)
class StudyConfig:
    methods: tuple[str, ...] = ("uniform-dtc", "iter-times")
    n_obst: tuple[int, ...] = (2, 3, 4)
    n_instances: int = 10
    node_budget: int = 2000
    alpha: float = alg.DEFAULT_ALPHA
    grow_dt: float = 0.5
    base_seed: int = 0
    workers: int = 1
    wall_time: bool = False
    params: InstanceParams = field(default_factory=InstanceParams)

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.n_instances < 0 or self.node_budget < 1 or self.workers < 1:
            raise ValueError("n_instances >= 0, node_budget >= 1 and workers >= 1 required")
        alg._check_alpha(self.alpha)
        if not self.grow_dt > 0:
            raise ValueError("grow_dt must be positive")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d


@dataclass(frozen=True)
class BenchRecord:
    seed: int
    method: str
    n_obst: int
    n_avoid_times: int
    nodes: int
    pivots: int
    wall_ms: float | None
    success: bool

    def __post_init__(self):
        if self.nodes < 0 or self.pivots < 0 or (self.wall_ms is not None and self.wall_ms < 0):
            raise ValueError("effort fields must be non-negative")

    def csv_row(self) -> list[str]:
        wall = "" if self.wall_ms is None else f"{self.wall_ms:.3f}"
        return [str(self.seed), self.method, str(self.n_obst), str(self.n_avoid_times),
                str(self.nodes), str(self.pivots), wall, "1" if self.success else "0"]


def run_method(problem: Problem, method: str, cfg: StudyConfig):
    """Run one method on one instance; returns ``(record fields, trajectory or None)``."""
    solver = BudgetedSolver(SolverConfig(max_binaries=100_000), cfg.node_budget)
    alpha = cfg.alpha
    v_max = max_speed(problem.start)
    t0 = time.perf_counter()
    traj = None
    report = None
    try:
        if method == "uniform-dtc":
            dt = alg.critical_sample_time(problem.min_radius, alpha, v_max)
            traj, report = alg.uniform_gridding(problem, alpha, dt, solver=solver)
        elif method == "uniform-2dtmin":
            dt = 2.0 * alg.delta_t_min(alpha, problem.min_radius, v_max)
            traj, report = alg.uniform_gridding(problem, alpha, dt, solver=solver)
        elif method == "iter-times":
            traj, report = alg.iterative_time_selection(problem, alpha, solver=solver)
        else:
            times = alg.uniform_grid_times(problem.t_f, cfg.grow_dt, len(problem.obstacles))
            traj, report = alg.obstacle_growing(problem, alpha, times, solver=solver)
        success = not report.collisions
    except alg.PlanningError as exc:
        report = exc.report
        success = False
        traj = None
    wall = (time.perf_counter() - t0) * 1e3 if cfg.wall_time else None
    n_times = report.n_avoid_times if report else 0
    nodes = report.nodes if report else 0
    pivots = report.pivots if report else 0
    return (n_times, nodes, pivots, wall, success), (traj if success else None)


def _run_instance(args):
    cfg, n_obst, seed = args
    problem = random_instance(cfg.params.replace(n_obst=n_obst), seed)
    out = []
    for method in cfg.methods:
        (n_times, nodes, pivots, wall, success), _ = run_method(problem, method, cfg)
        out.append(BenchRecord(seed, method, n_obst, n_times, nodes, pivots, wall, success))
    return out


def _order(r: BenchRecord):
    return (r.n_obst, r.seed, METHODS.index(r.method))


def run_study(cfg: StudyConfig) -> list[BenchRecord]:
    """One record per (instance, method); every method sees the same instance."""
    jobs = [(cfg, n, cfg.base_seed + i) for n in cfg.n_obst for i in range(cfg.n_instances)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_run_instance, jobs))
    else:
        chunks = [_run_instance(j) for j in jobs]
    return sorted((r for c in chunks for r in c), key=_order)


def records_to_csv(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[BenchRecord]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    rows = csv.DictReader(io.StringIO(body))
    out = []
    for row in rows:
        out.append(BenchRecord(int(row["seed"]), row["method"], int(row["n_obst"]),
                               int(row["n_avoid_times"]), int(row["nodes"]), int(row["pivots"]),
                               float(row["wall_ms"]) if row["wall_ms"] else None,
                               row["success"] == "1"))
    return out


def _effort(r: BenchRecord, metric: str) -> float:
    if metric == "wall_ms":
        if r.wall_ms is None:
            raise ValueError("wall time was not recorded")
        return r.wall_ms
    return float(getattr(r, metric))


def fraction_solved_curve(records: Sequence[BenchRecord], method: str, metric: str = "nodes",
                          n_obst: int | None = None) -> list[tuple[float, float]]:
    """Empirical CDF of effort over all runs of ``method``; failed runs never count as solved."""
    rs = [r for r in records if r.method == method and (n_obst is None or r.n_obst == n_obst)]
    if not rs:
        raise ValueError(f"no records for method {method!r}")
    efforts = sorted(_effort(r, metric) for r in rs if r.success)
    pts = []
    for i, e in enumerate(efforts, start=1):
        if pts and pts[-1][0] == e:
            pts[-1] = (e, i / len(rs))
        else:
            pts.append((e, i / len(rs)))
    return pts


def effort_quantile(records: Sequence[BenchRecord], method: str, q: float = 0.7,
                    metric: str = "nodes", n_obst: int | None = None) -> float:
    """Smallest effort at which a fraction ``q`` of runs is solved (inf if never)."""
    rs = [r for r in records if r.method == method and (n_obst is None or r.n_obst == n_obst)]
    if not rs:
        raise ValueError(f"no records for method {method!r}")
    efforts = sorted(_effort(r, metric) if r.success else math.inf for r in rs)
    return efforts[max(math.ceil(q * len(efforts) - 1e-9), 1) - 1]


@dataclass
class ScalingSummary:
    q: float
    metric: str
    quantiles: dict[tuple[str, int], float]
    growth: dict[str, float]

    def table(self) -> list[tuple[str, int, float]]:
        return [(m, n, v) for (m, n), v in sorted(self.quantiles.items())]


def scaling_summary(records: Sequence[BenchRecord], q: float = 0.7, metric: str = "nodes") -> ScalingSummary:
    """Per (method, N_obst) effort quantile and the slope of log(quantile) vs N_obst.

    A method with an unreached quantile at some N_obst gets an infinite slope."""
    methods = sorted({r.method for r in records}, key=METHODS.index)
    quantiles, growth = {}, {}
    for m in methods:
        ns = sorted({r.n_obst for r in records if r.method == m})
        if len(ns) < 2:
            raise ValueError(f"method {m!r} needs records for at least two obstacle counts")
        vals = [effort_quantile(records, m, q, metric, n) for n in ns]
        quantiles.update({(m, n): v for n, v in zip(ns, vals)})
        if any(math.isinf(v) for v in vals):
            growth[m] = math.inf
        else:
            growth[m] = float(np.polyfit(ns, np.log(np.maximum(vals, 1.0)), 1)[0])
    return ScalingSummary(q, metric, quantiles, growth)
