"""Optimization models for the vehicle: effort LP, avoidance MILP, min-time MILP.

Vehicle states never appear as model variables.  Positions and velocities at
any time are affine in the per-step inputs (see ``dynamics.axis_input_map``),
so every model holds only inputs, effort slacks, and binaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dynamics import ControlGrid, ControlSchedule, State, Trajectory, axis_input_map
from .milp import Model, Relation, SolveResult, VarId

DEFAULT_H = 10.0
EPS_STRICT = 1e-6


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        object.__setattr__(self, "radius", float(self.radius))
        if len(self.center) != 2 or len(self.velocity) != 2:
            raise ValueError("obstacle center and velocity are 2-vectors")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"obstacle radius must be positive, got {self.radius}")

    def center_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.center) + t[..., None] * np.asarray(self.velocity)


@dataclass(frozen=True)
class Problem:
    start: State
    finish: State
    t_f: float
    N_u: int = 10
    M_u: int = 10
    M_o: int = 10
    obstacles: tuple[Obstacle, ...] = ()
    H: float = DEFAULT_H
    eps_strict: float = EPS_STRICT

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not (self.t_f > 0 and math.isfinite(self.t_f)):
            raise ValueError("t_f must be positive")
        if self.N_u < 1:
            raise ValueError("N_u must be >= 1")
        if self.M_u < 3 or self.M_o < 3:
            raise ValueError("polygons need at least 3 sides (M_u, M_o >= 3)")
        if self.H <= self.field_size + self.max_radius:
            raise ValueError(
                f"H={self.H} must exceed field size {self.field_size:.3g} "
                f"plus largest radius {self.max_radius:.3g}")

    @property
    def max_radius(self) -> float:
        return max((o.radius for o in self.obstacles), default=0.0)

    @property
    def min_radius(self) -> float:
        return min((o.radius for o in self.obstacles), default=math.inf)

    @property
    def field_size(self) -> float:
        """Diagonal of the box holding both endpoints and every obstacle disc."""
        pts = [self.start.position, self.finish.position]
        for o in self.obstacles:
            for tt in (0.0, self.t_f):
                c = o.center_at(tt)
                pts += [c - o.radius, c + o.radius]
        pts = np.array(pts)
        return float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))

    def control_grid(self, horizon: float | None = None) -> ControlGrid:
        return ControlGrid.uniform(self.N_u, self.t_f if horizon is None else horizon)

    def replace(self, **changes) -> "Problem":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class HalfPlanes:
    """Polygon ``{p : normals @ p <= offsets}``."""

    normals: np.ndarray
    offsets: np.ndarray

    def slack(self, points) -> np.ndarray:
        """``offsets - normals @ p`` for each point; shape (..., M)."""
        p = np.asarray(points, dtype=float)
        return self.offsets - p @ self.normals.T

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return np.all(self.slack(points) >= -tol, axis=-1)

    def vertices(self) -> np.ndarray:
        """Intersections of consecutive edges (the polygon corners)."""
        n, b = self.normals, self.offsets
        out = []
        for m in range(len(b)):
            M = np.array([n[m], n[(m + 1) % len(b)]])
            out.append(np.linalg.solve(M, [b[m], b[(m + 1) % len(b)]]))
        return np.array(out)


def _side_normals(M: int) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(1, M + 1) / M
    return np.column_stack([np.sin(ang), np.cos(ang)])


def control_polygon_constraints(M_u: int) -> HalfPlanes:
    """``M_u`` half-planes whose polygon is inscribed in the unit disc."""
    if M_u < 3:
        raise ValueError("M_u must be >= 3")
    return HalfPlanes(_side_normals(M_u), np.full(M_u, math.cos(math.pi / M_u)))


def obstacle_polygon(obstacle: Obstacle, t: float, M_o: int, radius: float | None = None) -> HalfPlanes:
    """``M_o``-gon circumscribing the disc of ``radius`` around the obstacle at ``t``."""
    if M_o < 3:
        raise ValueError("M_o must be >= 3")
    radius = obstacle.radius if radius is None else float(radius)
    if not radius > 0:
        raise ValueError("radius must be positive")
    n = _side_normals(M_o)
    return HalfPlanes(n, radius + n @ obstacle.center_at(t))


@dataclass(frozen=True)
class AvoidanceTimeSet:
    """Avoidance times with the obstacles constrained at each one."""

    times: tuple[float, ...] = ()
    subsets: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.subsets):
            raise ValueError("one obstacle subset per time")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("avoidance times must increase strictly")

    @classmethod
    def for_all(cls, times: Iterable[float], n_obstacles: int) -> "AvoidanceTimeSet":
        times = tuple(float(t) for t in times)
        return cls(times, tuple(tuple(range(n_obstacles)) for _ in times))

    def add(self, t: float, obstacle: int) -> "AvoidanceTimeSet":
        pairs = dict(zip(self.times, self.subsets))
        pairs[float(t)] = tuple(sorted(set(pairs.get(float(t), ())) | {obstacle}))
        keys = sorted(pairs)
        return AvoidanceTimeSet(tuple(keys), tuple(pairs[k] for k in keys))

    def pairs(self):
        for t, sub in zip(self.times, self.subsets):
            for j in sub:
                yield t, j

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def n_pairs(self) -> int:
        return sum(len(s) for s in self.subsets)

    def validate(self, t_f: float, n_obstacles: int) -> None:
        for t, sub in zip(self.times, self.subsets):
            if not 0.0 < t <= t_f * (1 + 1e-12):
                raise ValueError(f"avoidance time {t} outside (0, {t_f}]")
            if any(not 0 <= j < n_obstacles for j in sub):
                raise ValueError(f"unknown obstacle index in {sub}")


@dataclass
class AvoidanceBlock:
    time: float
    obstacle: int
    radius: float
    binaries: list[VarId]


@dataclass
class Formulation:
    """A model plus the handles needed to read a trajectory back out of it."""

    model: Model
    problem: Problem
    grid: ControlGrid
    ux: list[VarId]
    uy: list[VarId]
    zx: list[VarId] = field(default_factory=list)
    zy: list[VarId] = field(default_factory=list)
    blocks: list[AvoidanceBlock] = field(default_factory=list)

    def position_map(self, t: float):
        """``(cx, gx, cy, gy)`` with ``x(t) = cx + gx @ ux`` and likewise for y."""
        return _position_map(self.problem.start, self.grid, t)

    def schedule(self, result: SolveResult) -> ControlSchedule:
        u = np.column_stack([result.values_of(self.ux), result.values_of(self.uy)])
        return ControlSchedule(self.grid, u)

    def trajectory(self, result: SolveResult) -> Trajectory:
        return Trajectory(self.problem.start, self.schedule(result))


def _position_map(start: State, grid: ControlGrid, t: float):
    Fx, Gx = axis_input_map(grid, t)
    cx = Fx[0] @ [start.x, start.vx]
    cy = Fx[0] @ [start.y, start.vy]
    return cx, Gx[0], cy, Gx[0]


def _axis_state_map(start: State, grid: ControlGrid, t: float):
    """Rows (x, y, vx, vy) as ``const + coef_x @ ux + coef_y @ uy``."""
    F, G = axis_input_map(grid, t)
    const = np.array([F[0] @ [start.x, start.vx], F[0] @ [start.y, start.vy],
                      F[1] @ [start.x, start.vx], F[1] @ [start.y, start.vy]])
    zero = np.zeros_like(G[0])
    coef_x = np.array([G[0], zero, G[1], zero])
    coef_y = np.array([zero, G[0], zero, G[1]])
    return const, coef_x, coef_y


def _add_inputs(model: Model, problem: Problem, grid: ControlGrid, tag: str = ""):
    ux = [model.add_continuous(-1.0, 1.0, f"ux{tag}[{k}]") for k in range(grid.n_steps)]
    uy = [model.add_continuous(-1.0, 1.0, f"uy{tag}[{k}]") for k in range(grid.n_steps)]
    poly = control_polygon_constraints(problem.M_u)
    for k in range(grid.n_steps):
        for (sx, sy), rhs in zip(poly.normals, poly.offsets):
            model.add_constraint([(ux[k], sx), (uy[k], sy)], Relation.LE, rhs)
    return ux, uy


def build_transfer(problem: Problem, horizon: float | None = None, *,
                   objective: bool = True, name: str = "min_effort") -> Formulation:
    """Boundary-value model over a uniform ``N_u``-step grid.

    With ``objective`` the model minimizes ``sum |ux| + |uy|`` through slack
    variables; without it the model is a pure feasibility problem."""
    grid = problem.control_grid(horizon)
    model = Model(name)
    ux, uy = _add_inputs(model, problem, grid)
    zx, zy = [], []
    if objective:
        zx = [model.add_continuous(0.0, math.inf, f"zx[{k}]") for k in range(grid.n_steps)]
        zy = [model.add_continuous(0.0, math.inf, f"zy[{k}]") for k in range(grid.n_steps)]
        for u, z in ((ux, zx), (uy, zy)):
            for k in range(grid.n_steps):
                model.add_constraint([(u[k], 1.0), (z[k], -1.0)], Relation.LE, 0.0)
                model.add_constraint([(u[k], 1.0), (z[k], 1.0)], Relation.GE, 0.0)
        model.set_objective([(v, 1.0) for v in zx + zy])

    const, coef_x, coef_y = _axis_state_map(problem.start, grid, grid.horizon)
    target = problem.finish.as_array()
    for i in range(4):
        terms = [(v, c) for v, c in zip(ux, coef_x[i]) if c != 0.0]
        terms += [(v, c) for v, c in zip(uy, coef_y[i]) if c != 0.0]
        model.add_constraint(terms, Relation.EQ, target[i] - const[i])
    return Formulation(model, problem, grid, ux, uy, zx, zy)


def build_min_effort(problem: Problem) -> Formulation:
    """Minimum control-effort LP, obstacles ignored."""
    return build_transfer(problem, objective=True)


def add_avoidance(form: Formulation, t: float, obstacle_index: int, radius: float,
                  H: float | None = None) -> AvoidanceBlock:
    """Keep the vehicle outside the obstacle's ``M_o``-gon of ``radius`` at ``t``.

    Adds ``M_o`` binaries ``b_m`` and the rows
    ``n_m . (p(t) - c(t)) >= radius + eps - H b_m`` plus ``sum b_m <= M_o - 1``.
    """
    problem = form.problem
    if not 0.0 <= t <= form.grid.horizon * (1 + 1e-12):
        raise ValueError(f"avoidance time {t} outside horizon [0, {form.grid.horizon}]")
    H = problem.H if H is None else H
    obstacle = problem.obstacles[obstacle_index]
    model = form.model
    cx, gx, cy, gy = form.position_map(t)
    ox, oy = obstacle.center_at(t)
    normals = _side_normals(problem.M_o)
    block = AvoidanceBlock(float(t), obstacle_index, float(radius), [])
    live_x = [(k, v) for k, (v, g) in enumerate(zip(form.ux, gx)) if g != 0.0]
    live_y = [(k, v) for k, (v, g) in enumerate(zip(form.uy, gy)) if g != 0.0]
    for m, (sx, sy) in enumerate(normals):
        b = model.add_binary(f"b[t={t:.6g},o={obstacle_index},m={m + 1}]")
        block.binaries.append(b)
        terms = [(v, sx * gx[k]) for k, v in live_x] + [(v, sy * gy[k]) for k, v in live_y]
        terms.append((b, H))
        rhs = radius + problem.eps_strict + sx * (ox - cx) + sy * (oy - cy)
        model.add_constraint(terms, Relation.GE, rhs)
    model.add_constraint([(b, 1.0) for b in block.binaries], Relation.LE, problem.M_o - 1)
    form.blocks.append(block)
    return block


def build_avoidance_problem(problem: Problem, times: AvoidanceTimeSet,
                            radii: Sequence[float] | None = None) -> Formulation:
    """Effort LP plus avoidance blocks at every (time, obstacle) pair."""
    radii = [o.radius for o in problem.obstacles] if radii is None else list(radii)
    if len(radii) != len(problem.obstacles):
        raise ValueError("one buffer radius per obstacle")
    for r, o in zip(radii, problem.obstacles):
        if r < o.radius:
            raise ValueError("buffer radii must not be smaller than obstacle radii")
    times.validate(problem.t_f, len(problem.obstacles))
    form = build_min_effort(problem)
    form.model.name = "avoidance"
    for t, j in times.pairs():
        add_avoidance(form, t, j, radii[j])
    return form


@dataclass
class MinTimeGridFormulation:
    """Uniform-sample minimum-time MILP; ``deltas[k-1]`` marks arrival at ``k*T``."""

    model: Model
    problem: Problem
    T: float
    deltas: list[VarId]
    candidates: list[Formulation]

    @property
    def N_T(self) -> int:
        return len(self.deltas)

    def k_sol(self, result: SolveResult) -> int:
        d = result.values_of(self.deltas)
        return int(np.argmax(d)) + 1

    def bracket(self, result: SolveResult) -> tuple[float, float]:
        k = self.k_sol(result)
        return (k - 1) * self.T, k * self.T

    def trajectory(self, result: SolveResult) -> Trajectory:
        k = self.k_sol(result)
        form = self.candidates[0] if len(self.candidates) == 1 else self.candidates[k - 1]
        return form.trajectory(result)


def build_mintime_uniform(problem: Problem, T: float, N_T: int, *,
                          shared_inputs: bool = False) -> MinTimeGridFormulation:
    """Earliest-arrival MILP over sample times ``k*T``, ``k = 1..N_T``.

    By default each candidate arrival time gets its own ``N_u``-step input
    sequence on the grid ``k*T/N_u``, the same model a single feasibility
    probe at ``k*T`` uses.  ``shared_inputs=True`` instead uses one input per
    sample interval shared by every candidate.
    """
    if not T > 0 or N_T < 1:
        raise ValueError("need T > 0 and N_T >= 1")
    model = Model("mintime_uniform")
    H = problem.H
    target = problem.finish.as_array()
    deltas = [model.add_binary(f"delta[{k}]") for k in range(1, N_T + 1)]
    candidates: list[Formulation] = []
    if shared_inputs:
        grid = ControlGrid.uniform(N_T, N_T * T)
        ux, uy = _add_inputs(model, problem, grid)
        candidates.append(Formulation(model, problem, grid, ux, uy))
    for k in range(1, N_T + 1):
        if shared_inputs:
            form = candidates[0]
        else:
            grid = ControlGrid.uniform(problem.N_u, k * T)
            ux, uy = _add_inputs(model, problem, grid, tag=f"^{k}")
            form = Formulation(model, problem, grid, ux, uy)
            candidates.append(form)
        const, coef_x, coef_y = _axis_state_map(problem.start, form.grid, k * T)
        d = deltas[k - 1]
        for i in range(4):
            terms = [(v, c) for v, c in zip(form.ux, coef_x[i]) if c != 0.0]
            terms += [(v, c) for v, c in zip(form.uy, coef_y[i]) if c != 0.0]
            gap = target[i] - const[i]
            # state_i - target_i <= H (1 - delta)  and  >= -H (1 - delta)
            model.add_constraint(terms + [(d, H)], Relation.LE, gap + H)
            model.add_constraint(terms + [(d, -H)], Relation.GE, gap - H)
    model.add_constraint([(d, 1.0) for d in deltas], Relation.EQ, 1.0)
    model.set_objective([(d, float(k)) for k, d in enumerate(deltas, start=1)])
    return MinTimeGridFormulation(model, problem, float(T), deltas, candidates)
