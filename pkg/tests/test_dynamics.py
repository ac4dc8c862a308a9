import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from itermilp.dynamics import (
    ControlGrid,
    ControlSchedule,
    State,
    Trajectory,
    axis_input_map,
    discretize,
    eval_trajectory,
    max_speed,
    propagate,
    rollout,
)

finite = st.floats(-5, 5, allow_nan=False)
step = st.floats(1e-6, 3.0)


def ode_step(x0, u, T):
    """RK45 at tight tolerance on p'' + p' = u."""
    def rhs(_, s):
        return [s[2], s[3], u[0] - s[2], u[1] - s[3]]

    sol = solve_ivp(rhs, (0.0, T), x0, method="DOP853", rtol=1e-13, atol=1e-13)
    return sol.y[:, -1]


def test_discretize_matches_ode(rng):
    for T in rng.uniform(0.01, 2.0, 15):
        x0 = rng.normal(size=4)
        u = rng.uniform(-1, 1, 2)
        m = discretize(T)
        np.testing.assert_allclose(m.A @ x0 + m.B @ u, ode_step(x0, u, T), atol=1e-10)


def test_discretize_closed_form_values():
    # T = 1: e^-1 terms written out
    m = discretize(1.0)
    e = np.exp(-1.0)
    assert m.A[0, 2] == pytest.approx(1 - e, abs=1e-15)
    assert m.A[2, 2] == pytest.approx(e, abs=1e-15)
    assert m.B[0, 0] == pytest.approx(e, abs=1e-15)  # T - 1 + e^-T at T = 1
    assert m.B[2, 0] == pytest.approx(1 - e, abs=1e-15)


def test_zero_step_is_identity():
    m = discretize(0.0)
    np.testing.assert_array_equal(m.A, np.eye(4))
    np.testing.assert_array_equal(m.B, np.zeros((4, 2)))


def test_small_step_keeps_precision():
    # expm1 keeps the B entries accurate where 1 - exp(-T) would cancel
    T = 1e-9
    m = discretize(T)
    assert m.B[0, 0] == pytest.approx(T * T / 2, rel=1e-6)
    assert m.B[2, 0] == pytest.approx(T, rel=1e-8)


@pytest.mark.parametrize("T", [-1.0, float("nan"), float("inf")])
def test_discretize_rejects_bad_steps(T):
    with pytest.raises(ValueError):
        discretize(T)


@given(a=step, b=step)
def test_semigroup(a, b):
    ma, mb, mab = discretize(a), discretize(b), discretize(a + b)
    np.testing.assert_allclose(mb.A @ ma.A, mab.A, atol=1e-12)
    np.testing.assert_allclose(mb.A @ ma.B + mb.B, mab.B, atol=1e-12)


@given(x=st.tuples(finite, finite, finite, finite), u=st.tuples(finite, finite), dt=step)
def test_propagate_agrees_with_matrices(x, u, dt):
    s = propagate(State(*x), u, dt)
    m = discretize(dt)
    np.testing.assert_allclose(s.as_array(), m.A @ np.array(x) + m.B @ np.array(u), atol=1e-12)


def test_propagate_rejects_bad_input():
    with pytest.raises(ValueError):
        propagate(State(0, 0, 0, 0), (float("nan"), 0.0), 1.0)
    with pytest.raises(ValueError):
        propagate(State(0, 0, 0, 0), (0.0, 0.0), -1.0)


def test_state_validation():
    with pytest.raises(ValueError):
        State(0, float("inf"), 0, 0)
    with pytest.raises(ValueError):
        State.from_array([1, 2, 3])
    assert State(3, 4, 3, 4).speed == 5.0


def test_grid_validation():
    with pytest.raises(ValueError):
        ControlGrid([0.0])
    with pytest.raises(ValueError):
        ControlGrid([0.1, 1.0])
    with pytest.raises(ValueError):
        ControlGrid([0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        ControlGrid.uniform(0, 1.0)
    g = ControlGrid.uniform(3, 0.3)
    assert g.horizon == 0.3 and g.n_steps == 3
    assert g.uniform_step == pytest.approx(0.1)
    assert ControlGrid([0.0, 0.1, 0.5]).uniform_step is None


@given(n=st.integers(1, 40), horizon=st.floats(0.01, 50), frac=st.floats(0, 1))
def test_step_index_brackets_time(n, horizon, frac):
    g = ControlGrid.uniform(n, horizon)
    t = frac * horizon
    k = int(g.step_index(t))
    assert 0 <= k < n
    assert g.times[k] <= t
    assert t <= g.times[k + 1] or k == n - 1


def test_step_index_at_grid_points():
    g = ControlGrid.uniform(10, 3.0)
    k = g.step_index(g.times)
    np.testing.assert_array_equal(k, list(range(10)) + [9])


def test_schedule_shape_checks():
    g = ControlGrid.uniform(4, 1.0)
    with pytest.raises(ValueError):
        ControlSchedule(g, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ControlSchedule(g, np.full((4, 2), np.nan))


def _random_traj(rng, n=8, horizon=3.0):
    g = ControlGrid.uniform(n, horizon)
    u = rng.uniform(-0.7, 0.7, (n, 2))
    return Trajectory(State(*rng.normal(size=4)), ControlSchedule(g, u))


def test_trajectory_sample_matches_ode(rng):
    traj = _random_traj(rng)
    x = traj.start.as_array()
    t0 = 0.0
    for k in range(traj.grid.n_steps):
        t1 = traj.grid.times[k + 1]
        tm = 0.5 * (t0 + t1)
        np.testing.assert_allclose(traj.sample(tm), ode_step(x, traj.schedule.inputs[k], tm - t0), atol=1e-10)
        x = ode_step(x, traj.schedule.inputs[k], t1 - t0)
        t0 = t1
    np.testing.assert_allclose(traj.sample(traj.end_time), x, atol=1e-9)


def test_trajectory_continuous_at_grid_points(rng):
    traj = _random_traj(rng)
    for t in traj.grid.times[1:-1]:
        a = traj.sample(t - 1e-9)
        b = traj.sample(t + 1e-9)
        np.testing.assert_allclose(a, b, atol=1e-7)


def test_rollout_matches_grid_states(rng):
    traj = _random_traj(rng)
    states = rollout(traj.start, traj.schedule)
    assert len(states) == traj.grid.n_steps + 1
    np.testing.assert_allclose([s.as_array() for s in states], traj.grid_states)
    np.testing.assert_allclose(traj.sample(traj.grid.times), traj.grid_states, atol=1e-12)
    assert eval_trajectory(traj, 0.0) == traj.start


def test_sample_rejects_outside_horizon(rng):
    traj = _random_traj(rng)
    with pytest.raises(ValueError):
        traj.sample(-0.1)
    with pytest.raises(ValueError):
        traj.sample(traj.end_time + 1.0)


@given(t=st.floats(0, 3.0))
def test_axis_input_map_is_exact(t):
    rng = np.random.default_rng(7)
    traj = _random_traj(rng)
    F, G = axis_input_map(traj.grid, t)
    s = traj.start
    x = F @ [s.x, s.vx] + G @ traj.schedule.inputs[:, 0]
    y = F @ [s.y, s.vy] + G @ traj.schedule.inputs[:, 1]
    np.testing.assert_allclose([x[0], y[0], x[1], y[1]], traj.sample(t), atol=1e-12)


def test_axis_input_map_ignores_future_steps():
    g = ControlGrid.uniform(5, 5.0)
    _, G = axis_input_map(g, 2.0)
    assert np.all(G[:, 2:] == 0.0)


@given(v=st.tuples(st.floats(-3, 3), st.floats(-3, 3)), seed=st.integers(0, 1000))
def test_speed_never_exceeds_bound(v, seed):
    # inputs inside the unit disc: speed stays below max(1, |v0|)
    rng = np.random.default_rng(seed)
    n = 12
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = np.sqrt(rng.uniform(0, 1, n))
    u = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    start = State(0.0, 0.0, *v)
    traj = Trajectory(start, ControlSchedule(ControlGrid.uniform(n, 6.0), u))
    s = traj.sample(np.linspace(0, 6.0, 400))
    assert np.max(np.hypot(s[:, 2], s[:, 3])) <= max_speed(start) + 1e-12
