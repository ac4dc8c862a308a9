"""Planning algorithms: iterative avoidance-time selection, obstacle growing,
uniform gridding, and minimum-time search (bisection, grid MILP, hybrid)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dynamics import Trajectory, max_speed
from .formulations import (
    AvoidanceTimeSet,
    Formulation,
    MinTimeGridFormulation,
    Obstacle,
    Problem,
    build_avoidance_problem,
    build_mintime_uniform,
    build_transfer,
    obstacle_polygon,
)
from .milp import EmbeddedSolver, MILPSolver, SolverConfig, SolveResult, SolveStats, Status

BISECTION_TOL = 1e-9
DEFAULT_ALPHA = 1.1
# scan resolution used to find an outside point before bisecting an interval edge
_EDGE_SCAN = 4096


class PlanningError(RuntimeError):
    """Base class for algorithm failures; carries the report so far."""

    def __init__(self, message: str, report: "IterationReport | None" = None):
        super().__init__(message)
        self.report = report


class PlanningInfeasible(PlanningError):
    """An inner MILP has no solution."""


class BudgetExceeded(PlanningError):
    """An inner solve hit its node limit, or the iteration cap was reached."""


class UnreachableError(PlanningError):
    """No feasible arrival time was found within the probe cap."""


PLANNING_MAX_BINARIES = 100_000
PLANNING_NODE_LIMIT = 100_000


def default_solver() -> EmbeddedSolver:
    # uniform grids easily need more binaries than the solver's own default allows,
    # and late iterations of the time selection can need more than 20k nodes
    return EmbeddedSolver(SolverConfig(max_binaries=PLANNING_MAX_BINARIES, node_limit=PLANNING_NODE_LIMIT))


# -- sample-time formulas ---------------------------------------------------------

def _check_alpha(alpha: float) -> None:
    if not (alpha > 1.0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be > 1, got {alpha!r}")


def delta_t_min(alpha: float, R_min: float, v_max: float) -> float:
    """Shortest time to travel from a buffer boundary to its obstacle."""
    _check_alpha(alpha)
    if not (R_min > 0 and v_max > 0):
        raise ValueError("R_min and v_max must be positive")
    return (alpha - 1.0) * R_min / v_max


def termination_bound(t_s: float, t_f: float, alpha: float, R_min: float, v_max: float) -> int:
    """``floor((t_f - t_s) / dt_min)``; a hair of slack absorbs rounding in ``dt_min``."""
    if not t_f > t_s:
        raise ValueError("need t_f > t_s")
    q = (t_f - t_s) / delta_t_min(alpha, R_min, v_max)
    return math.floor(q * (1.0 + 1e-12))


def critical_sample_time(R_min: float, alpha: float, v_max: float) -> float:
    """Largest uniform spacing for which straight motion between samples
    cannot cut the obstacle disc while missing the buffer."""
    _check_alpha(alpha)
    if not (R_min > 0 and v_max > 0):
        raise ValueError("R_min and v_max must be positive")
    return critical_chord(R_min, alpha) / v_max


def critical_chord(R: float, alpha: float) -> float:
    """Chord of the radius ``alpha*R`` circle that is tangent to the radius ``R`` circle."""
    _check_alpha(alpha)
    return 2.0 * R * math.sqrt(alpha * alpha - 1.0)


def uniform_grid_times(t_f: float, dt: float, n_obstacles: int = 1) -> AvoidanceTimeSet:
    """Times ``k*dt`` for ``k = 1..ceil(t_f/dt)``, the last clamped to ``t_f``."""
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive")
    if not t_f > 0:
        raise ValueError("t_f must be positive")
    q = t_f / dt
    n = max(1, math.ceil(q * (1.0 - 1e-12)))
    times = [min(k * dt, t_f) for k in range(1, n + 1)]
    times[-1] = t_f
    return AvoidanceTimeSet.for_all(times, n_obstacles)


def default_n_samples(problem: Problem, alpha: float) -> int:
    """Verification density: ``max(10^3, ceil(100 t_f / dt_min))``."""
    if not problem.obstacles:
        return 1000
    dt = delta_t_min(alpha, problem.min_radius, max_speed(problem.start))
    return max(1000, math.ceil(100.0 * problem.t_f / dt))


# -- collision checking ---------------------------------------------------------

@dataclass(frozen=True)
class Collision:
    obstacle: int
    t1: float
    t2: float
    t_hit: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.t1 + self.t2)


def _inside(traj: Trajectory, obstacle: Obstacle, t) -> np.ndarray:
    d = traj.positions(t) - obstacle.center_at(t)
    return np.einsum("...i,...i->...", d, d) < obstacle.radius ** 2


def _depth(traj: Trajectory, obstacle: Obstacle, t) -> np.ndarray:
    d = traj.positions(t) - obstacle.center_at(t)
    return obstacle.radius ** 2 - np.einsum("...i,...i->...", d, d)


def collision_check(traj: Trajectory, obstacles: Sequence[Obstacle], n_samples: int) -> list[Collision]:
    """Sample ``n_samples`` evenly spaced times and report one witness per
    run of consecutive samples strictly inside an obstacle."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    ts = np.linspace(0.0, traj.end_time, int(n_samples))
    out = []
    for j, obst in enumerate(obstacles):
        depth = _depth(traj, obst, ts)
        inside = depth > 0.0
        if not inside.any():
            continue
        edges = np.diff(inside.astype(np.int8))
        starts = list(np.flatnonzero(edges == 1) + 1)
        ends = list(np.flatnonzero(edges == -1) + 1)
        if inside[0]:
            starts.insert(0, 0)
        if inside[-1]:
            ends.append(ts.size)
        for a, b in zip(starts, ends):
            k = a + int(np.argmax(depth[a:b]))
            t1, t2 = collision_interval(traj, obst, float(ts[k]))
            out.append(Collision(j, t1, t2, float(ts[k])))
    out.sort(key=lambda c: (c.t1, c.obstacle))
    return out


def _edge(traj, obstacle, t_in, t_out, tol):
    """Bisect between an inside time and an outside time."""
    while abs(t_out - t_in) > tol:
        mid = 0.5 * (t_in + t_out)
        if _inside(traj, obstacle, mid):
            t_in = mid
        else:
            t_out = mid
    return t_in, t_out


def collision_interval(traj: Trajectory, obstacle: Obstacle, t_hit: float,
                       tol: float = BISECTION_TOL) -> tuple[float, float]:
    """Entry and exit times of the containment interval around ``t_hit``,
    clamped to ``[0, t_f]``."""
    t_hit = float(t_hit)
    if not _inside(traj, obstacle, t_hit):
        raise ValueError(f"trajectory is not inside the obstacle at t={t_hit}")
    t_end = traj.end_time
    ts = np.linspace(0.0, t_end, _EDGE_SCAN + 1)
    inside = _inside(traj, obstacle, ts)

    left = ts[ts < t_hit]
    out_left = left[~inside[: left.size]]
    if out_left.size == 0:
        t1 = 0.0
    else:
        t0 = float(out_left[-1])
        # the scan can skip over a brief exit; the first outside sample may sit past a
        # later inside sample, so bisect from the nearest inside sample after it
        t_in = float(ts[ts > t0][0]) if ts[ts > t0][0] < t_hit else t_hit
        _, t1 = _edge(traj, obstacle, t_in, t0, tol)
        t1 = min(t1, t_hit)

    right_mask = ts > t_hit
    out_right = ts[right_mask][~inside[right_mask]]
    if out_right.size == 0:
        t2 = t_end
    else:
        t0 = float(out_right[0])
        prev = ts[ts < t0][-1]
        t_in = float(prev) if prev > t_hit else t_hit
        _, t2 = _edge(traj, obstacle, t_in, t0, tol)
        t2 = max(t2, t_hit)
    return float(t1), float(t2)


# -- reports ------------------------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    n_avoid_times: int
    n_pairs: int
    n_collisions: int
    nodes: int
    pivots: int
    lp_solves: int
    objective: float | None
    radii: tuple[float, ...]
    clipped: tuple[int, ...] = ()


@dataclass
class IterationReport:
    algorithm: str
    termination: str = "running"
    bound: int | None = None
    iterations: list[IterationRecord] = field(default_factory=list)
    times: AvoidanceTimeSet = field(default_factory=AvoidanceTimeSet)
    radii: tuple[float, ...] = ()
    collisions: list[Collision] = field(default_factory=list)
    trajectory: Trajectory | None = None

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    @property
    def n_avoid_times(self) -> int:
        return self.times.n_times

    @property
    def nodes(self) -> int:
        return sum(r.nodes for r in self.iterations)

    @property
    def pivots(self) -> int:
        return sum(r.pivots for r in self.iterations)

    def as_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "termination": self.termination,
            "bound": self.bound,
            "n_iterations": self.n_iterations,
            "n_avoid_times": self.n_avoid_times,
            "n_pairs": self.times.n_pairs,
            "nodes": self.nodes,
            "pivots": self.pivots,
            "avoid_times": [[t, list(s)] for t, s in zip(self.times.times, self.times.subsets)],
            "radii": list(self.radii),
            "collisions": [[c.obstacle, c.t1, c.t2] for c in self.collisions],
            "iterations": [
                {"iteration": r.iteration, "n_avoid_times": r.n_avoid_times, "n_pairs": r.n_pairs,
                 "n_collisions": r.n_collisions, "clipped": list(r.clipped),
                 "nodes": r.nodes, "pivots": r.pivots,
                 "objective": r.objective}
                for r in self.iterations
            ],
        }


def _as_time_set(times, n_obstacles: int) -> AvoidanceTimeSet:
    if times is None:
        return AvoidanceTimeSet()
    if isinstance(times, AvoidanceTimeSet):
        return times
    return AvoidanceTimeSet.for_all(sorted(set(float(t) for t in times)), n_obstacles)


def buffer_violation(form: Formulation, result: SolveResult) -> float:
    """Largest depth of the solved path inside any constrained buffer polygon.

    Zero means every (time, obstacle) constraint holds geometrically."""
    traj = form.trajectory(result)
    worst = 0.0
    for block in form.blocks:
        poly = obstacle_polygon(form.problem.obstacles[block.obstacle], block.time,
                                form.problem.M_o, block.radius)
        p = traj.positions(block.time)
        # outside the polygon means at least one edge has the point on its far side
        worst = max(worst, float(np.min(poly.slack(p))))
    return worst


def _solve_avoidance(problem, times, radii, solver, report, iteration):
    form = build_avoidance_problem(problem, times, radii)
    res = solver.solve_milp(form.model)
    rec = IterationRecord(iteration, times.n_times, times.n_pairs, 0, res.stats.nodes,
                          res.stats.pivots, res.stats.lp_solves, res.objective, tuple(radii))
    report.iterations.append(rec)
    report.times = times
    report.radii = tuple(radii)
    if res.status is Status.INFEASIBLE:
        report.termination = "infeasible"
        raise PlanningInfeasible(
            f"avoidance MILP infeasible at iteration {iteration} (buffer radii {list(radii)})", report)
    if res.status is not Status.OPTIMAL:
        report.termination = "node-limit"
        raise BudgetExceeded(f"MILP solve stopped early ({res.status.value}) at iteration {iteration}", report)
    if buffer_violation(form, res) > 1e-6:
        raise RuntimeError("solved trajectory enters a constrained buffer polygon")
    return form, res


def midpoint(t1: float, t2: float) -> float:
    return 0.5 * (t1 + t2)


def iterative_time_selection(problem: Problem, alpha: float = DEFAULT_ALPHA, initial_times=None, *,
                             solver: MILPSolver | None = None, n_samples: int | None = None,
                             new_time: Callable[[float, float], float] = midpoint,
                             max_iterations: int | None = None) -> tuple[Trajectory, IterationReport]:
    """Add avoidance times where the last solution collided until it does not.

    MILPs use buffer radii ``alpha*R``; collisions are checked against the
    true radii.  Each collision adds one time, ``new_time(t1, t2)``, for the
    colliding obstacle only."""
    _check_alpha(alpha)
    solver = solver or default_solver()
    obstacles = problem.obstacles
    times = _as_time_set(initial_times, len(obstacles))
    radii = [alpha * o.radius for o in obstacles]
    n_samples = n_samples or default_n_samples(problem, alpha)
    report = IterationReport("iter-times")
    if obstacles:
        report.bound = termination_bound(0.0, problem.t_f, alpha, problem.min_radius, max_speed(problem.start))
        cap = max_iterations or 4 * max(report.bound, 1)
    else:
        cap = 1

    for it in range(1, cap + 1):
        form, res = _solve_avoidance(problem, times, radii, solver, report, it)
        traj = form.trajectory(res)
        hits = collision_check(traj, obstacles, n_samples)
        report.iterations[-1].n_collisions = len(hits)
        report.iterations[-1].clipped = tuple(sorted({c.obstacle for c in hits}))
        report.collisions = hits
        report.trajectory = traj
        if not hits:
            report.termination = "collision-free"
            return traj, report
        for c in hits:
            t_new = float(new_time(c.t1, c.t2))
            if not c.t1 <= t_new <= c.t2 or t_new <= 0.0:
                raise ValueError(f"new avoidance time {t_new} outside its interval [{c.t1}, {c.t2}]")
            times = times.add(t_new, c.obstacle)
    report.termination = "iteration-cap"
    raise BudgetExceeded(f"no collision-free trajectory after {cap} iterations", report)


def obstacle_growing(problem: Problem, alpha: float = DEFAULT_ALPHA, times=None, *,
                     solver: MILPSolver | None = None, n_samples: int | None = None,
                     max_iterations: int = 100) -> tuple[Trajectory, IterationReport]:
    """Keep the avoidance times fixed and inflate the buffer of every obstacle
    the solution collides with by ``alpha`` until it is collision free."""
    _check_alpha(alpha)
    solver = solver or default_solver()
    obstacles = problem.obstacles
    times = _as_time_set(times, len(obstacles))
    radii = [alpha * o.radius for o in obstacles]
    n_samples = n_samples or default_n_samples(problem, alpha)
    report = IterationReport("grow")
    for it in range(1, max_iterations + 1):
        form, res = _solve_avoidance(problem, times, radii, solver, report, it)
        traj = form.trajectory(res)
        hits = collision_check(traj, obstacles, n_samples)
        report.iterations[-1].n_collisions = len(hits)
        report.iterations[-1].clipped = tuple(sorted({c.obstacle for c in hits}))
        report.collisions = hits
        report.trajectory = traj
        if not hits:
            report.termination = "collision-free"
            return traj, report
        for j in sorted({c.obstacle for c in hits}):
            radii[j] *= alpha
        bad = [j for j in range(len(obstacles)) if radii[j] > problem.H - problem.field_size]
        if bad:
            # past this size the big-M constant no longer relaxes the constraint
            report.termination = "infeasible"
            report.radii = tuple(radii)
            raise PlanningInfeasible(f"buffer radii of obstacles {bad} outgrew the field", report)
    report.termination = "iteration-cap"
    raise BudgetExceeded(f"no collision-free trajectory after {max_iterations} growth steps", report)


def uniform_gridding(problem: Problem, alpha: float, dt: float, *,
                     solver: MILPSolver | None = None,
                     n_samples: int | None = None) -> tuple[Trajectory, IterationReport]:
    """One MILP with buffers ``alpha*R`` at every ``k*dt``; collisions are reported, not repaired."""
    solver = solver or default_solver()
    times = uniform_grid_times(problem.t_f, dt, len(problem.obstacles))
    radii = [alpha * o.radius for o in problem.obstacles]
    report = IterationReport("uniform")
    form, res = _solve_avoidance(problem, times, radii, solver, report, 1)
    traj = form.trajectory(res)
    if problem.obstacles:
        if n_samples is None:
            n_samples = default_n_samples(problem, alpha) if alpha > 1 else 10_000
        report.collisions = collision_check(traj, problem.obstacles, n_samples)
    report.iterations[-1].n_collisions = len(report.collisions)
    report.iterations[-1].clipped = tuple(sorted({c.obstacle for c in report.collisions}))
    report.trajectory = traj
    report.termination = "collision-free" if not report.collisions else "collisions"
    return traj, report


# -- minimum time -----------------------------------------------------------------

@dataclass(frozen=True)
class TimeBracket:
    """``(t_L, t_R]`` stored dyadically: ``t_L = t_lb + D*a/2^k``, width ``D/2^k``."""

    t_lb: float
    t_ub: float
    level: int = 0
    index: int = 0

    def __post_init__(self):
        if not self.t_lb < self.t_ub:
            raise ValueError("bracket needs t_lb < t_ub")

    @property
    def width(self) -> float:
        return math.ldexp(self.t_ub - self.t_lb, -self.level)

    @property
    def t_L(self) -> float:
        return self.t_lb + self.index * self.width

    @property
    def t_R(self) -> float:
        if self.index + 1 == 1 << self.level:
            return self.t_ub
        return self.t_lb + (self.index + 1) * self.width

    @property
    def t_M(self) -> float:
        return self.t_lb + (2 * self.index + 1) * math.ldexp(self.t_ub - self.t_lb, -self.level - 1)

    def lower_half(self) -> "TimeBracket":
        return TimeBracket(self.t_lb, self.t_ub, self.level + 1, 2 * self.index)

    def upper_half(self) -> "TimeBracket":
        return TimeBracket(self.t_lb, self.t_ub, self.level + 1, 2 * self.index + 1)

    def contains(self, t: float) -> bool:
        return self.t_L < t <= self.t_R


@dataclass(frozen=True)
class Probe:
    time: float
    feasible: bool
    nodes: int
    pivots: int


@dataclass
class MinTimeReport:
    method: str
    eps: float | None = None
    brackets: list[TimeBracket] = field(default_factory=list)
    probes: list[Probe] = field(default_factory=list)
    k_sol: int | None = None
    T: float | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def monotone(self) -> bool:
        """False if some infeasible probe lies above a feasible one."""
        feas = [p.time for p in self.probes if p.feasible]
        infeas = [p.time for p in self.probes if not p.feasible]
        return not feas or not infeas or max(infeas) < min(feas)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "eps": self.eps,
            "T": self.T,
            "k_sol": self.k_sol,
            "brackets": [[b.t_L, b.t_R, b.width] for b in self.brackets],
            "probes": [[p.time, p.feasible, p.nodes, p.pivots] for p in self.probes],
            "monotone": self.monotone,
            "nodes": self.stats.nodes,
            "pivots": self.stats.pivots,
        }


class MinTimeResult(NamedTuple):
    t_star: float
    trajectory: Trajectory
    report: MinTimeReport


def _probe(problem: Problem, t: float, solver: MILPSolver, report: MinTimeReport):
    """Feasibility of reaching the finish at exactly ``t`` on the grid ``t/N_u``."""
    if t <= 0.0:
        same = np.array_equal(problem.start.as_array(), problem.finish.as_array())
        report.probes.append(Probe(float(t), bool(same), 0, 0))
        return bool(same), None
    form = build_transfer(problem, horizon=t, objective=False, name="mintime_probe")
    res = solver.check_feasible(form.model)
    report.stats.add(res.stats)
    ok = res.feasible
    report.probes.append(Probe(float(t), ok, res.stats.nodes, res.stats.pivots))
    traj = form.trajectory(SolveResult(res.status, res.values, None, res.stats)) if ok else None
    return ok, traj


def mintime_bounds(problem: Problem, alpha: float = 2.0, max_probes: int = 60, *,
                   solver: MILPSolver | None = None,
                   report: MinTimeReport | None = None) -> tuple[float, float]:
    """Distance lower bound and the first feasible time of the form ``alpha^n t_lb``.

    With coincident endpoints ``t_lb = 0`` and the probes start at 1."""
    _check_alpha(alpha)
    solver = solver or default_solver()
    report = report or MinTimeReport("bounds")
    d = float(np.hypot(*(problem.finish.position - problem.start.position)))
    t_lb = d / max_speed(problem.start)
    base = t_lb if t_lb > 0.0 else 1.0 / alpha
    for n in range(1, max_probes + 1):
        t = base * alpha ** n
        ok, _ = _probe(problem, t, solver, report)
        if ok:
            return t_lb, t
    raise UnreachableError(f"target not reachable by t = {base * alpha ** max_probes:.6g}")


def mintime_binary_search(problem: Problem, t_lb: float, t_ub: float, eps: float, *,
                          solver: MILPSolver | None = None,
                          max_iterations: int | None = None) -> MinTimeResult:
    """Bisect ``(t_lb, t_ub]`` on feasibility until the bracket is at most ``eps`` wide.

    Returns ``t_R`` and the witness trajectory found at ``t_R``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    solver = solver or default_solver()
    report = MinTimeReport("bsearch", eps=eps)
    bracket = TimeBracket(float(t_lb), float(t_ub))
    ok, witness = _probe(problem, bracket.t_ub, solver, report)
    if not ok:
        raise ValueError(f"model at t_ub={t_ub} is infeasible")
    report.brackets.append(bracket)
    while bracket.width > eps:
        if max_iterations is not None and bracket.level >= max_iterations:
            break
        t_mid = bracket.t_M
        ok, traj = _probe(problem, t_mid, solver, report)
        if ok:
            bracket, witness = bracket.lower_half(), traj
        else:
            bracket = bracket.upper_half()
        report.brackets.append(bracket)
    return MinTimeResult(bracket.t_R, witness, report)


@dataclass
class GridResult:
    k_sol: int
    T: float
    bracket: tuple[float, float]
    trajectory: Trajectory
    report: MinTimeReport
    formulation: MinTimeGridFormulation


def mintime_grid(problem: Problem, T: float, N_T: int | None = None, *,
                 solver: MILPSolver | None = None, shared_inputs: bool = False) -> GridResult:
    """Earliest feasible sample ``k*T`` from one MILP over candidates ``k = 1..N_T``.

    Without ``N_T`` the horizon comes from :func:`mintime_bounds`."""
    if not T > 0:
        raise ValueError("T must be positive")
    solver = solver or default_solver()
    report = MinTimeReport("grid", T=float(T))
    if N_T is None:
        _, t_ub = mintime_bounds(problem, solver=solver, report=report)
        N_T = max(1, math.ceil(t_ub / T * (1.0 - 1e-12)))
    form = build_mintime_uniform(problem, T, N_T, shared_inputs=shared_inputs)
    res = solver.solve_milp(form.model)
    report.stats.add(res.stats)
    if res.status is Status.INFEASIBLE:
        raise UnreachableError(f"no arrival time k*T <= {N_T * T:.6g}")
    if res.status is not Status.OPTIMAL:
        raise BudgetExceeded(f"grid MILP stopped early ({res.status.value})")
    k = form.k_sol(res)
    report.k_sol = k
    bracket = ((k - 1) * T, k * T)
    return GridResult(k, float(T), bracket, form.trajectory(res), report, form)


class HybridResult(NamedTuple):
    t_star: float
    trajectory: Trajectory
    grid: GridResult
    search: MinTimeResult


def mintime_hybrid(problem: Problem, T: float, eps: float, N_T: int | None = None, *,
                   solver: MILPSolver | None = None) -> HybridResult:
    """Grid MILP for a width-``T`` bracket, then bisection inside it."""
    solver = solver or default_solver()
    grid = mintime_grid(problem, T, N_T, solver=solver)
    lo, hi = grid.bracket
    if grid.k_sol == 1 and np.array_equal(problem.start.as_array(), problem.finish.as_array()):
        lo = 0.0
    search = mintime_binary_search(problem, lo, hi, eps, solver=solver)
    return HybridResult(search.t_star, search.trajectory, grid, search)
