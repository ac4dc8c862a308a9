import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from itermilp import algorithms as alg
from itermilp import bench
from itermilp.bench import BenchRecord, InstanceParams, StudyConfig, random_instance
from itermilp.dynamics import max_speed


@given(seed=st.integers(0, 2**31), n=st.integers(0, 6))
def test_random_instance_invariants(seed, n):
    p = InstanceParams(n_obst=n)
    prob = random_instance(p, seed)
    assert 0.5 <= prob.start.speed <= 1.0
    np.testing.assert_array_equal(prob.start.position, [-0.8, -0.8])
    np.testing.assert_array_equal(prob.finish.as_array(), [1.0, 1.0, 0.0, 0.0])
    assert len(prob.obstacles) == n
    for o in prob.obstacles:
        c = np.array(o.center)
        assert 0.2 <= o.radius <= 0.3
        assert np.hypot(*c) <= 1.0
        assert np.hypot(*(c - [-0.8, -0.8])) > o.radius + 0.5
        assert np.hypot(*(c - [1.0, 1.0])) > o.radius + 0.1
    assert (prob.N_u, prob.M_u, prob.M_o, prob.t_f) == (10, 10, 10, 6.0)


def test_random_instance_deterministic():
    p = InstanceParams(n_obst=4)
    assert random_instance(p, 7) == random_instance(p, 7)
    assert random_instance(p, 7) != random_instance(p, 8)
    assert random_instance(p.replace(seed=7)) == random_instance(p, 7)


def test_random_instance_reference_values():
    # frozen: guards the draw order (speed, heading, then radius, r, angle per obstacle)
    prob = random_instance(InstanceParams(n_obst=2), 0)
    rng = np.random.default_rng([0, 2])
    r_v = rng.uniform(0.5, 1.0)
    th = 2 * math.pi - rng.uniform(0, 2 * math.pi)
    assert prob.start.vx == pytest.approx(r_v * math.cos(th), abs=1e-15)
    assert prob.start.vy == pytest.approx(r_v * math.sin(th), abs=1e-15)


def test_rejection_cap():
    # the obstacle can never clear the start circle
    p = InstanceParams(n_obst=1, r=(0.0, 0.0), start_xy=(0.0, 0.0), max_draws=50)
    with pytest.raises(ValueError, match="over-constrained"):
        random_instance(p, 0)


@pytest.mark.parametrize("kw", [dict(r_v=(1.0, 0.5)), dict(R_obst=(0.0, 0.1)), dict(R_s=0.0),
                                dict(n_obst=-1), dict(r=(0, float("inf")))])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        InstanceParams(**kw)


def test_study_validation():
    with pytest.raises(ValueError):
        StudyConfig(methods=("nope",))
    with pytest.raises(ValueError):
        StudyConfig(node_budget=0)
    with pytest.raises(ValueError):
        StudyConfig(alpha=1.0)
    with pytest.raises(ValueError):
        BenchRecord(0, "iter-times", 2, 0, -1, 0, None, True)


def test_empty_study():
    assert bench.run_study(StudyConfig(n_instances=0)) == []


def test_smoke_study_paired_and_ordered():
    cfg = StudyConfig(methods=("iter-times", "uniform-dtc"), n_obst=(2,), n_instances=2, node_budget=400)
    recs = bench.run_study(cfg)
    assert [(r.seed, r.method) for r in recs] == [
        (0, "uniform-dtc"), (0, "iter-times"), (1, "uniform-dtc"), (1, "iter-times")]
    for r in recs:
        if r.method == "uniform-dtc":
            prob = random_instance(cfg.params.replace(n_obst=2), r.seed)
            dt = alg.critical_sample_time(prob.min_radius, cfg.alpha, max_speed(prob.start))
            assert r.n_avoid_times == math.ceil(prob.t_f / dt)
        assert r.nodes <= cfg.node_budget
        assert r.wall_ms is None
    text = bench.records_to_csv(recs)
    assert text.splitlines()[0] == ",".join(bench.CSV_HEADER)
    assert bench.records_from_csv("# comment\n" + text) == recs


def test_successful_runs_are_collision_free():
    cfg = StudyConfig(methods=("iter-times", "grow"), n_obst=(3,), n_instances=1, node_budget=600)
    prob = random_instance(cfg.params.replace(n_obst=3), 1)
    for m in cfg.methods:
        (n_times, nodes, pivots, wall, ok), traj = bench.run_method(prob, m, cfg)
        if ok:
            assert alg.collision_check(traj, prob.obstacles, 10_000) == []
        else:
            assert traj is None


def test_budget_is_shared_across_solves():
    s = bench.BudgetedSolver(bench.SolverConfig(max_binaries=100_000), 5)
    prob = random_instance(InstanceParams(n_obst=2), 3)
    times = alg.uniform_grid_times(prob.t_f, 0.3, 2)
    with pytest.raises(alg.PlanningError):
        alg.iterative_time_selection(prob, 1.1, times, solver=s)
    assert s.remaining <= 0


def _recs(method, efforts, n_obst=2, fail=()):
    return [BenchRecord(i, method, n_obst, 0, e, 0, None, i not in fail) for i, e in enumerate(efforts)]


def test_fraction_curve_single_step():
    pts = bench.fraction_solved_curve(_recs("iter-times", [5, 5, 5]), "iter-times")
    assert pts == [(5.0, 1.0)]


@given(efforts=st.lists(st.integers(0, 100), min_size=1, max_size=30), data=st.data())
def test_fraction_curve_is_cdf(efforts, data):
    fail = set(data.draw(st.sets(st.integers(0, len(efforts) - 1))))
    recs = _recs("grow", efforts, fail=fail)
    pts = bench.fraction_solved_curve(recs, "grow")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    assert xs == sorted(set(xs))
    assert all(a < b for a, b in zip(ys, ys[1:]))
    success = (len(efforts) - len(fail)) / len(efforts)
    assert (ys[-1] if ys else 0.0) == pytest.approx(success)


@given(efforts=st.lists(st.integers(0, 1000), min_size=1, max_size=40), q=st.floats(0.05, 1.0))
def test_quantile_is_order_statistic(efforts, q):
    recs = _recs("iter-times", efforts)
    v = bench.effort_quantile(recs, "iter-times", q)
    k = math.ceil(q * len(efforts) - 1e-9)
    assert v == sorted(efforts)[max(k, 1) - 1]
    # read off the curve: first point reaching q
    pts = bench.fraction_solved_curve(recs, "iter-times")
    assert v == next(e for e, f in pts if f >= q - 1e-12)


def test_quantile_with_failures_is_inf():
    recs = _recs("iter-times", [1, 2, 3, 4], fail={0, 1})
    assert bench.effort_quantile(recs, "iter-times", 0.7) == math.inf
    assert bench.effort_quantile(recs, "iter-times", 0.5) == 4
    with pytest.raises(ValueError):
        bench.effort_quantile(recs, "grow")


def test_scaling_summary_flat_and_growth():
    recs = _recs("iter-times", [10] * 5, 2) + _recs("iter-times", [10] * 5, 3)
    s = bench.scaling_summary(recs)
    assert s.growth["iter-times"] == pytest.approx(0.0, abs=1e-12)
    recs = _recs("uniform-dtc", [10] * 5, 2) + _recs("uniform-dtc", [100] * 5, 3) + _recs("uniform-dtc", [1000] * 5, 4)
    s = bench.scaling_summary(recs)
    assert s.growth["uniform-dtc"] == pytest.approx(math.log(10))
    assert s.table()[0] == ("uniform-dtc", 2, 10.0)
    with pytest.raises(ValueError):
        bench.scaling_summary(_recs("grow", [1, 2], 2))
    recs = _recs("grow", [1, 2], 2) + _recs("grow", [1, 2], 3, fail={0, 1})
    assert bench.scaling_summary(recs).growth["grow"] == math.inf


def test_wall_metric_requires_recording():
    with pytest.raises(ValueError):
        bench.fraction_solved_curve(_recs("grow", [1]), "grow", metric="wall_ms")
