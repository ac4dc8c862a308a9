import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from itermilp import algorithms as alg
from itermilp.dynamics import ControlGrid, ControlSchedule, State, Trajectory
from itermilp.formulations import AvoidanceTimeSet, Obstacle, Problem, build_transfer
from itermilp.milp import EmbeddedSolver, SolverConfig, check_feasible


def straight_line(y0=0.0, horizon=2.0, n=4):
    """Unit speed along +x from (-1, y0): v0 = u = (1, 0) keeps the speed at 1."""
    g = ControlGrid.uniform(n, horizon)
    u = np.tile([1.0, 0.0], (n, 1))
    return Trajectory(State(-1.0, y0, 1.0, 0.0), ControlSchedule(g, u))


# -- formulas ---------------------------------------------------------------------

def test_formula_values():
    assert alg.delta_t_min(1.1, 0.2, 1.0) == pytest.approx(0.02)
    # 6 / 0.02 sits a rounding error under 300
    assert alg.termination_bound(0.0, 6.0, 1.1, 0.2, 1.0) == 300
    assert alg.termination_bound(1.0, 2.0, 2.0, 0.5, 2.0) == 4
    assert alg.critical_chord(1.0, 1.25) == pytest.approx(1.5)
    assert alg.critical_sample_time(0.2, 1.1, 1.0) == pytest.approx(0.4 * math.sqrt(0.21))
    assert alg.critical_sample_time(1.0, 1.25, 2.0) == pytest.approx(0.75)


@pytest.mark.parametrize("alpha", [1.0, 0.5, float("nan"), float("inf")])
def test_formulas_reject_bad_alpha(alpha):
    with pytest.raises(ValueError):
        alg.delta_t_min(alpha, 0.2, 1.0)
    with pytest.raises(ValueError):
        alg.critical_chord(0.2, alpha)


def test_formula_domain_errors():
    with pytest.raises(ValueError):
        alg.termination_bound(2.0, 1.0, 1.1, 0.2, 1.0)
    with pytest.raises(ValueError):
        alg.delta_t_min(1.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        alg.critical_sample_time(0.2, 1.1, 0.0)


def test_uniform_grid_times():
    ts = alg.uniform_grid_times(6.0, 0.5, 2)
    assert ts.n_times == 12 and ts.n_pairs == 24
    assert ts.times[0] == 0.5 and ts.times[-1] == 6.0
    # exact multiple despite rounding in t_f / dt
    assert alg.uniform_grid_times(0.3, 0.1).n_times == 3
    ts = alg.uniform_grid_times(1.0, 0.3)
    assert ts.times == pytest.approx((0.3, 0.6, 0.9, 1.0))
    assert alg.uniform_grid_times(1.0, 5.0).times == (1.0,)
    with pytest.raises(ValueError):
        alg.uniform_grid_times(1.0, 0.0)


@given(t_f=st.floats(0.1, 20), dt=st.floats(0.01, 5))
def test_uniform_grid_count_is_ceiling(t_f, dt):
    ts = alg.uniform_grid_times(t_f, dt)
    n = ts.n_times
    assert ts.times[-1] == t_f
    assert (n - 1) * dt < t_f * (1 + 1e-9)
    assert n * dt >= t_f * (1 - 1e-9)


@given(R=st.floats(0.05, 2), alpha=st.floats(1.01, 3), frac=st.floats(0.0, 0.999))
def test_short_chords_miss_inner_disc(R, alpha, frac):
    # a chord of the buffer circle shorter than the critical one stays outside radius R
    L = frac * alg.critical_chord(R, alpha)
    h = math.sqrt((alpha * R) ** 2 - (L / 2) ** 2)  # distance from center to the chord
    assert h >= R * (1 - 1e-12)


# -- collision checking ------------------------------------------------------------

def test_collision_interval_oracle():
    traj = straight_line(y0=0.1)
    ob = Obstacle((0.0, 0.0), 0.3)
    half = math.sqrt(0.3 ** 2 - 0.1 ** 2)
    hits = alg.collision_check(traj, [ob], 2001)
    assert len(hits) == 1
    c = hits[0]
    assert c.obstacle == 0
    assert c.t1 == pytest.approx(1.0 - half, abs=1e-8)
    assert c.t2 == pytest.approx(1.0 + half, abs=1e-8)
    assert c.t_hit == pytest.approx(1.0, abs=1e-3)
    assert c.midpoint == pytest.approx(1.0, abs=1e-8)


def test_collision_check_clear_path():
    traj = straight_line(y0=0.5)
    assert alg.collision_check(traj, [Obstacle((0.0, 0.0), 0.3)], 1000) == []
    with pytest.raises(ValueError):
        alg.collision_check(traj, [], 1)


def test_collision_check_multiple_runs_sorted():
    traj = straight_line(y0=0.0, horizon=3.0)
    obs = [Obstacle((1.0, 0.0), 0.2), Obstacle((0.0, 0.0), 0.2)]
    hits = alg.collision_check(traj, obs, 3000)
    assert [h.obstacle for h in hits] == [1, 0]
    assert hits[0].t1 == pytest.approx(0.8, abs=1e-8)
    assert hits[1].t2 == pytest.approx(2.2, abs=1e-8)


def test_collision_interval_clamped_at_ends():
    traj = straight_line(y0=0.0, horizon=1.0)
    t1, t2 = alg.collision_interval(traj, Obstacle((0.0, 0.0), 0.5), 1.0)
    assert t1 == pytest.approx(0.5, abs=1e-8) and t2 == 1.0
    with pytest.raises(ValueError):
        alg.collision_interval(traj, Obstacle((5.0, 5.0), 0.5), 0.5)


def test_moving_obstacle_collision():
    # obstacle moving with the vehicle: inside the whole time
    traj = straight_line(y0=0.0, horizon=1.0)
    ob = Obstacle((-1.0, 0.05), 0.2, velocity=(1.0, 0.0))
    hits = alg.collision_check(traj, [ob], 500)
    assert len(hits) == 1 and hits[0].t1 == 0.0 and hits[0].t2 == 1.0


# -- avoidance planners -----------------------------------------------------------

def test_iterative_selection_corridor(corridor_problem):
    traj, rep = alg.iterative_time_selection(corridor_problem, 1.1)
    assert rep.termination == "collision-free"
    assert alg.collision_check(traj, corridor_problem.obstacles, 10_000) == []
    assert 1 <= rep.n_iterations <= rep.bound
    assert rep.n_avoid_times == rep.n_iterations - 1
    assert rep.iterations[0].n_avoid_times == 0 and rep.iterations[0].n_collisions == 1
    json.dumps(rep.as_dict())


def test_iterative_selection_no_obstacles(open_problem):
    traj, rep = alg.iterative_time_selection(open_problem)
    assert rep.n_iterations == 1 and rep.bound is None
    np.testing.assert_allclose(traj.sample(open_problem.t_f), open_problem.finish.as_array(), atol=1e-8)


def test_iterative_selection_custom_rule(corridor_problem):
    _, rep = alg.iterative_time_selection(corridor_problem, 1.1, new_time=lambda a, b: a + 0.25 * (b - a))
    assert rep.termination == "collision-free"
    with pytest.raises(ValueError):
        alg.iterative_time_selection(corridor_problem, 1.1, new_time=lambda a, b: b + 1.0)


def test_iterative_selection_iteration_cap(corridor_problem):
    with pytest.raises(alg.BudgetExceeded) as err:
        alg.iterative_time_selection(corridor_problem, 1.1, max_iterations=1)
    assert err.value.report.termination == "iteration-cap"


def test_iterative_selection_infeasible():
    # the obstacle covers the finish point
    p = Problem(State(-1, 0, 0, 0), State(1, 0, 0, 0), t_f=4.0, obstacles=(Obstacle((1.0, 0.0), 0.3),))
    with pytest.raises(alg.PlanningInfeasible) as err:
        alg.iterative_time_selection(p, 1.1, initial_times=[4.0])
    assert err.value.report.termination == "infeasible"


def test_node_budget_surfaces_as_budget_exceeded(corridor_problem):
    solver = EmbeddedSolver(SolverConfig(node_limit=1, rounding_heuristic=False))
    times = alg.uniform_grid_times(4.0, 0.2, 1)
    with pytest.raises(alg.BudgetExceeded):
        alg.iterative_time_selection(corridor_problem, 1.1, times, solver=solver)


def test_uniform_gridding_counts(corridor_problem):
    dt = alg.critical_sample_time(0.3, 1.1, 1.0)
    traj, rep = alg.uniform_gridding(corridor_problem, 1.1, dt)
    assert rep.n_avoid_times == math.ceil(4.0 / dt)
    assert rep.termination == "collision-free"


def test_uniform_gridding_coarse_clips(corridor_problem):
    # one avoidance time at the end: the path cuts straight through
    traj, rep = alg.uniform_gridding(corridor_problem, 1.1, 4.0)
    assert rep.termination == "collisions"
    assert len(rep.collisions) == 1


def test_obstacle_growing_grows_only_clipped():
    p = Problem(State(-1, 0, 0, 0), State(1.2, 0, 0, 0), t_f=4.0,
                obstacles=(Obstacle((0.0, 0.05), 0.25), Obstacle((0.0, 1.5), 0.2)))
    times = alg.uniform_grid_times(4.0, 0.8, 2)
    traj, rep = alg.obstacle_growing(p, 1.1, times)
    assert rep.n_iterations == 5
    assert rep.termination == "collision-free"
    assert rep.radii[1] == pytest.approx(1.1 * 0.2)
    assert rep.radii[0] > 1.1 * 0.25
    assert alg.collision_check(traj, p.obstacles, 10_000) == []


def test_obstacle_growing_engulfing_is_infeasible():
    # one avoidance time at the finish: the buffer grows until it swallows the finish
    p = Problem(State(-1, 0, 0, 0), State(1, 0, 0, 0), t_f=4.0, obstacles=(Obstacle((0.0, 0.0), 0.3),))
    with pytest.raises(alg.PlanningInfeasible) as err:
        alg.obstacle_growing(p, 1.1, [4.0])
    assert err.value.report.termination == "infeasible"
    assert err.value.report.radii[0] > 0.3


# -- minimum time -----------------------------------------------------------------

@pytest.fixture
def mt_problem():
    return Problem(State(0, 0, 0.5, 0), State(1, 0.5, 0, 0), t_f=5.0, N_u=6, M_u=8)


def test_time_bracket_is_dyadic():
    b = alg.TimeBracket(1.0, 2.0)
    assert (b.t_L, b.t_R, b.t_M, b.width) == (1.0, 2.0, 1.5, 1.0)
    for k in range(1, 40):
        b = b.lower_half() if k % 3 else b.upper_half()
        assert b.width == math.ldexp(1.0, -k)
        assert b.t_R - b.t_L == pytest.approx(b.width, abs=1e-15)
    assert b.contains(b.t_R) and not b.contains(b.t_L)
    with pytest.raises(ValueError):
        alg.TimeBracket(2.0, 1.0)


def test_bounds(mt_problem):
    t_lb, t_ub = alg.mintime_bounds(mt_problem)
    assert t_lb == pytest.approx(math.hypot(1, 0.5))
    assert check_feasible(build_transfer(mt_problem, horizon=t_ub, objective=False).model).feasible
    # t_ub is the first feasible doubling
    assert not check_feasible(build_transfer(mt_problem, horizon=t_ub / 2, objective=False).model).feasible


def test_bounds_unreachable(mt_problem):
    with pytest.raises(alg.UnreachableError):
        alg.mintime_bounds(mt_problem, max_probes=1, alpha=1.01)


def test_binary_search_law(mt_problem):
    t_lb, t_ub = alg.mintime_bounds(mt_problem)
    res = alg.mintime_binary_search(mt_problem, t_lb, t_ub, 1e-12, max_iterations=13)
    brackets = res.report.brackets
    assert len(brackets) == 14
    for k, b in enumerate(brackets):
        assert b.width == (t_ub - t_lb) / 2 ** k
    last = brackets[-1]
    assert res.t_star == last.t_R
    assert res.report.monotone
    np.testing.assert_allclose(res.trajectory.sample(res.t_star), mt_problem.finish.as_array(), atol=1e-7)


def test_binary_search_nesting(mt_problem):
    t_lb, t_ub = alg.mintime_bounds(mt_problem)
    coarse = alg.mintime_binary_search(mt_problem, t_lb, t_ub, 0.1)
    fine = alg.mintime_binary_search(mt_problem, t_lb, t_ub, 0.01)
    assert coarse.report.brackets[-1].width <= 0.1
    assert coarse.report.brackets[-1].contains(fine.t_star)


def test_binary_search_errors(mt_problem):
    with pytest.raises(ValueError):
        alg.mintime_binary_search(mt_problem, 0.5, 1.0, 1e-3)  # t_ub infeasible
    with pytest.raises(ValueError):
        alg.mintime_binary_search(mt_problem, 1.0, 4.0, 0.0)


def test_grid_and_hybrid_agree(mt_problem):
    g = alg.mintime_grid(mt_problem, 0.2)
    lo, hi = g.bracket
    assert hi - lo == pytest.approx(0.2)
    t_lb, t_ub = alg.mintime_bounds(mt_problem)
    bs = alg.mintime_binary_search(mt_problem, t_lb, t_ub, 1e-3)
    assert lo - 1e-3 < bs.t_star <= hi + 1e-3
    h = alg.mintime_hybrid(mt_problem, 0.2, 1e-3)
    assert abs(h.t_star - bs.t_star) <= 1e-3
    assert h.grid.k_sol == g.k_sol


def test_coincident_endpoints():
    s = State(0.2, 0.2, 0, 0)
    p = Problem(s, s, t_f=1.0, N_u=4)
    t_lb, t_ub = alg.mintime_bounds(p)
    assert t_lb == 0.0 and t_ub == 1.0
    h = alg.mintime_hybrid(p, 0.5, 1e-3)
    assert h.t_star <= 1e-3


def test_grid_unreachable(mt_problem):
    with pytest.raises(alg.UnreachableError):
        alg.mintime_grid(mt_problem, 0.1, N_T=3)
