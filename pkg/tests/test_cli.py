import json
import subprocess
import sys

import numpy as np
import pytest

from itermilp import cli

PROBLEM = {
    "start": [-0.8, -0.8, 0, 0],
    "finish": [1, 1, 0, 0],
    "t_f": 6.0,
    "obstacles": [{"center": [0.1, 0.1], "radius": 0.25}, {"center": [0.6, 0.4], "radius": 0.2}],
}


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(PROBLEM))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return header, body


def test_plan_effort(problem_file, tmp_path):
    out = tmp_path / "e.csv"
    assert run("plan-effort", problem_file, "--out", out, "--points", 50) == cli.EXIT_OK
    header, body = read_csv(out)
    assert any(h.startswith("# config:") for h in header)
    assert body[0] == "t,x,y,vx,vy,step,ux,uy"
    assert len(body) == 51
    last = np.array(body[-1].split(","), dtype=float)
    np.testing.assert_allclose(last[:5], [6.0, 1.0, 1.0, 0.0, 0.0], atol=1e-7)


def test_plan_avoid_is_collision_free_and_deterministic(problem_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    svg, rep = tmp_path / "a.svg", tmp_path / "r.json"
    assert run("plan-avoid", problem_file, "--out", a, "--svg", svg, "--report", rep, "--points", 2000) == 0
    assert run("plan-avoid", problem_file, "--out", b, "--points", 2000) == 0
    assert a.read_bytes() == b.read_bytes()
    assert svg.read_text().lstrip().startswith(("<?xml", "<svg"))
    report = json.loads(rep.read_text())
    assert report
    _, body = read_csv(a)
    xy = np.array([row.split(",")[1:3] for row in body[1:]], dtype=float)
    for o in PROBLEM["obstacles"]:
        d = np.hypot(*(xy - o["center"]).T)
        assert d.min() > o["radius"] - 1e-9


def test_config_echo_is_json(problem_file, tmp_path):
    out = tmp_path / "o.csv"
    run("plan-avoid", problem_file, "--method", "uniform", "--dt", 0.4, "--out", out)
    header, _ = read_csv(out)
    cfg = json.loads(next(h for h in header if h.startswith("# config:")).split(":", 1)[1])
    assert cfg["method"] == "uniform" and cfg["dt"] == 0.4
    assert "out" not in cfg


def test_plan_mintime(problem_file, tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run("plan-mintime", problem_file, "--method", "hybrid", "--eps", 0.05, "--out", out) == 0
    text = capsys.readouterr().out
    assert "t* =" in text
    header, body = read_csv(out)
    assert body[0].startswith("t,")


def test_random_instance_option(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("plan-effort", "--random", 3, "--seed", 5, "--out", a) == 0
    assert run("plan-effort", "--random", 3, "--seed", 5, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes(problem_file, tmp_path):
    assert run("plan-effort", tmp_path / "missing.json") == cli.EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("plan-effort", bad) == cli.EXIT_INPUT
    assert run("plan-effort") == cli.EXIT_INPUT
    assert run("plan-avoid", problem_file, "--alpha", 1.0) == cli.EXIT_INPUT
    assert run("no-such-command") == cli.EXIT_INPUT
    assert run("plan-effort", problem_file, "--t-f", 1.0) == cli.EXIT_INFEASIBLE
    assert run("plan-avoid", problem_file, "--t-f", 1.0) == cli.EXIT_INFEASIBLE
    assert run("bench", "--budget", 0) == cli.EXIT_INPUT
    # an avoidance MILP that cannot be closed within one node
    assert run("plan-avoid", problem_file, "--method", "uniform", "--dt", 0.1,
               "--node-limit", 1, "--out", tmp_path / "x.csv") == cli.EXIT_LIMIT


def test_engulfed_start_is_infeasible(tmp_path):
    doc = dict(PROBLEM, obstacles=[{"center": [-0.8, -0.8], "radius": 0.3}])
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    assert run("plan-avoid", path) == cli.EXIT_INFEASIBLE


def test_bench_smoke(tmp_path):
    a, b, svg = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.svg"
    args = ["bench", "--method", "iter-times,uniform-dtc", "--n-obst", "1,2", "--instances", 1, "--budget", 300]
    assert run(*args, "--out", a, "--svg", svg) == 0
    assert run(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert svg.exists()
    header, body = read_csv(a)
    assert any(h.startswith("# growth:") for h in header)
    rows = [r.split(",") for r in body[1:]]
    assert len(rows) == 4
    assert {r[1] for r in rows} == {"iter-times", "uniform-dtc"}


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "itermilp.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "plan-avoid" in res.stdout
