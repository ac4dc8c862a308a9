"""Damped double-integrator vehicle: exact discretization and evaluation.

Each axis obeys ``p'' + p' = u`` (nondimensional).  Over a step of length
``T`` with constant input the exact update is::

    p+ = p + (1 - e^-T) v + (T - 1 + e^-T) u
    v+ =         e^-T  v + (1 - e^-T)     u

and the same closed form evaluates the state anywhere inside a step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np


def _check_finite(name, *vals):
    for v in vals:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class State:
    x: float
    y: float
    vx: float
    vy: float

    def __post_init__(self):
        for f in ("x", "y", "vx", "vy"):
            object.__setattr__(self, f, float(getattr(self, f)))
        _check_finite("state", self.x, self.y, self.vx, self.vy)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "State":
        if len(a) != 4:
            raise ValueError("a state has four components (x, y, vx, vy)")
        return cls(*a)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlGrid:
    """Strictly increasing control times ``t_u[0] = 0 < ... < t_u[N_u]``."""

    times: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a control grid needs at least one step")
        if t[0] != 0.0 or not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0.0):
            raise ValueError("grid times must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, n_steps: int, horizon: float) -> "ControlGrid":
        if n_steps < 1 or not horizon > 0:
            raise ValueError("uniform grid needs n_steps >= 1 and horizon > 0")
        step = horizon / n_steps
        times = step * np.arange(n_steps + 1)
        times[-1] = horizon
        return cls(times)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @cached_property
    def durations(self) -> np.ndarray:
        return _frozen(np.diff(self.times))

    @cached_property
    def uniform_step(self) -> float | None:
        d = self.durations
        return float(d[0]) if np.allclose(d, d[0], rtol=1e-12, atol=0.0) else None

    def step_index(self, t):
        """Index ``k`` with ``t_u[k] <= t <= t_u[k+1]`` (last step for ``t`` at the end)."""
        t = np.asarray(t, dtype=float)
        if self.uniform_step is not None:
            k = np.floor(t / self.uniform_step).astype(np.int64)
        else:
            k = np.searchsorted(self.times, t, side="right") - 1
        k = np.clip(k, 0, self.n_steps - 1)
        # floor can land one step late by rounding right at a grid point
        k = np.where(self.times[k] > t, k - 1, k)
        return np.clip(k, 0, self.n_steps - 1)


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    grid: ControlGrid
    inputs: np.ndarray

    def __post_init__(self):
        u = _frozen(self.inputs)
        if u.shape != (self.grid.n_steps, 2):
            raise ValueError(f"expected inputs of shape ({self.grid.n_steps}, 2), got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ValueError("inputs must be finite")
        object.__setattr__(self, "inputs", u)

    @classmethod
    def zeros(cls, grid: ControlGrid) -> "ControlSchedule":
        return cls(grid, np.zeros((grid.n_steps, 2)))


@dataclass(frozen=True, eq=False)
class StepMatrices:
    A: np.ndarray
    B: np.ndarray
    T: float


def _step_coefficients(dt):
    """(velocity decay, position-from-velocity, position-from-input) for ``dt``."""
    em1 = np.expm1(-dt)
    return 1.0 + em1, -em1, dt + em1


def discretize(T: float) -> StepMatrices:
    """Exact zero-order-hold discretization over a step of length ``T``."""
    T = float(T)
    if not math.isfinite(T) or T < 0.0:
        raise ValueError(f"step duration must be finite and >= 0, got {T!r}")
    decay, p_v, p_u = _step_coefficients(T)
    A = np.eye(4)
    A[0, 2] = A[1, 3] = p_v
    A[2, 2] = A[3, 3] = decay
    B = np.zeros((4, 2))
    B[0, 0] = B[1, 1] = p_u
    B[2, 0] = B[3, 1] = p_v
    return StepMatrices(_frozen(A), _frozen(B), T)


def _propagate_arrays(states, u, dt):
    """Vectorized closed form; ``states`` (..., 4), ``u`` (..., 2), ``dt`` (...)."""
    decay, p_v, p_u = _step_coefficients(np.asarray(dt, dtype=float))
    decay, p_v, p_u = decay[..., None], p_v[..., None], p_u[..., None]
    pos = states[..., :2] + p_v * states[..., 2:] + p_u * u
    vel = decay * states[..., 2:] + p_v * u
    return np.concatenate([pos, vel], axis=-1)


def propagate(s: State, u: Sequence[float], dt: float) -> State:
    """State after ``dt`` under constant input ``u``."""
    ux, uy = (float(v) for v in u)
    dt = float(dt)
    _check_finite("input", ux, uy)
    _check_finite("dt", dt)
    if dt < 0.0:
        raise ValueError("dt must be >= 0")
    out = _propagate_arrays(s.as_array(), np.array([ux, uy]), np.array(dt))
    return State.from_array(out)


def rollout(start: State, schedule: ControlSchedule) -> list[State]:
    """Discrete states at every grid time (length ``N_u + 1``)."""
    return [State.from_array(row) for row in _rollout_array(start.as_array(), schedule)]


def _rollout_array(x0: np.ndarray, schedule: ControlSchedule) -> np.ndarray:
    durations = schedule.grid.durations
    out = np.empty((durations.size + 1, 4))
    out[0] = x0
    for k, T in enumerate(durations):
        m = discretize(T)
        out[k + 1] = m.A @ out[k] + m.B @ schedule.inputs[k]
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Continuous-time path induced by a schedule from a start state."""

    start: State
    schedule: ControlSchedule

    @property
    def grid(self) -> ControlGrid:
        return self.schedule.grid

    @property
    def end_time(self) -> float:
        return self.grid.horizon

    @cached_property
    def grid_states(self) -> np.ndarray:
        s = _rollout_array(self.start.as_array(), self.schedule)
        s.setflags(write=False)
        return s

    def sample(self, t) -> np.ndarray:
        """States at times ``t`` (array-like); shape ``t.shape + (4,)``."""
        t = np.asarray(t, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > self.end_time * (1 + 1e-12)):
            raise ValueError(f"time outside horizon [0, {self.end_time}]")
        k = self.grid.step_index(t)
        dt = np.maximum(t - self.grid.times[k], 0.0)
        return _propagate_arrays(self.grid_states[k], self.schedule.inputs[k], dt)

    def positions(self, t) -> np.ndarray:
        return self.sample(t)[..., :2]


def eval_trajectory(traj: Trajectory, t: float) -> State:
    return State.from_array(traj.sample(float(t)))


def max_speed(start: State) -> float:
    """Speed bound along any trajectory with ``|u| <= 1``.

    Steady-state speed under unit input is 1 and a faster initial speed
    only decays, so the bound is ``max(1, |v0|)``."""
    return max(1.0, start.speed)


def axis_input_map(grid: ControlGrid, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Affine map of one axis at time ``t``: ``[p, v](t) = F @ [p0, v0] + G @ u``.

    ``u`` stacks that axis' input for every step; steps after ``t`` get zero
    columns in ``G``."""
    t = float(t)
    if not 0.0 <= t <= grid.horizon * (1 + 1e-12):
        raise ValueError(f"time {t} outside horizon [0, {grid.horizon}]")
    F = np.eye(2)
    G = np.zeros((2, grid.n_steps))
    for k in range(grid.n_steps):
        t0 = grid.times[k]
        if t0 >= t and k > 0:
            break
        tau = min(grid.durations[k], t - t0)
        decay, p_v, p_u = _step_coefficients(max(tau, 0.0))
        step = np.array([[1.0, p_v], [0.0, decay]])
        F = step @ F
        G = step @ G
        G[0, k] += p_u
        G[1, k] += p_v
    return F, G
