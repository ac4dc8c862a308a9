"""Command-line front end.

Exit codes: 0 success, 2 infeasible, 3 input error, 4 budget or limit reached.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import algorithms as alg
from . import bench
from .dynamics import Trajectory, max_speed
from .formulations import build_min_effort
from .io import ProblemFileError, load_problem, load_study, problem_to_dict
from .milp import EmbeddedSolver, IndeterminateError, ModelTooLarge, SolverConfig, Status

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3
EXIT_LIMIT = 4

AVOID_METHODS = ("uniform", "uniform-2dtmin", "iter-times", "grow")
MINTIME_METHODS = ("bsearch", "grid", "hybrid")
DEFAULT_GROW_DT = 0.5
DEFAULT_COARSE_T = 0.2


@dataclasses.dataclass
class RunConfig:
    command: str
    input: str | None = None
    random: int | None = None
    method: str | None = None
    alpha: float | None = None
    eps: float | None = None
    dt: float | None = None
    N_u: int | None = None
    M_u: int | None = None
    M_o: int | None = None
    t_f: float | None = None
    seed: int | None = None
    node_limit: int = alg.PLANNING_NODE_LIMIT
    samples: int | None = None
    points: int = 500
    solver: str = "embedded"
    out: str | None = None
    svg: str | None = None
    report: str | None = None

    def echo(self) -> dict:
        """Resolved parameters, without output paths, so reruns elsewhere compare equal."""
        d = dataclasses.asdict(self)
        for k in ("out", "svg", "report"):
            d.pop(k)
        return d


# -- helpers ----------------------------------------------------------------------

def _solver(cfg: RunConfig):
    config = SolverConfig(max_binaries=1_000_000, node_limit=cfg.node_limit)
    if cfg.solver == "highs":
        from .milp.highs import HighsSolver

        return HighsSolver(config)
    return EmbeddedSolver(config)


def _load(cfg: RunConfig):
    if cfg.input is None and cfg.random is None:
        raise ProblemFileError("give a problem file or --random N_OBST")
    if cfg.input is not None:
        problem = load_problem(cfg.input)
    else:
        params = bench.InstanceParams(n_obst=cfg.random)
        problem = bench.random_instance(params, cfg.seed or 0)
    changes = {k: getattr(cfg, k) for k in ("N_u", "M_u", "M_o", "t_f") if getattr(cfg, k) is not None}
    if changes:
        try:
            problem = problem.replace(**changes)
        except ValueError as exc:
            raise ProblemFileError(str(exc)) from None
    return problem


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _header(cfg: RunConfig, problem=None, report=None) -> list[str]:
    lines = [f"# itermilp {cfg.command}", "# config: " + json.dumps(cfg.echo(), sort_keys=True)]
    if problem is not None:
        lines.append("# problem: " + json.dumps(problem_to_dict(problem), sort_keys=True))
    if report is not None:
        lines.append("# report: " + json.dumps(report, sort_keys=True))
    return lines


def trajectory_csv(traj: Trajectory, n_points: int = 500) -> list[str]:
    """Sampled states with the step index and the input active at each sample."""
    t = np.linspace(0.0, traj.end_time, n_points)
    s = traj.sample(t)
    k = traj.grid.step_index(t)
    u = traj.schedule.inputs[k]
    rows = ["t,x,y,vx,vy,step,ux,uy"]
    for i in range(t.size):
        vals = [_fmt(t[i])] + [_fmt(v) for v in s[i]] + [str(int(k[i]))] + [_fmt(v) for v in u[i]]
        rows.append(",".join(vals))
    return rows


def _emit(cfg: RunConfig, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _say(cfg: RunConfig, msg: str) -> None:
    # human-readable notes go to stderr whenever stdout carries the CSV
    print(msg, file=sys.stdout if cfg.out else sys.stderr)


def _write_report(cfg: RunConfig, report: dict | None) -> None:
    if cfg.report and report is not None:
        Path(cfg.report).write_text(json.dumps({"config": cfg.echo(), "report": report},
                                               indent=2, sort_keys=True) + "\n")


# -- commands ---------------------------------------------------------------------

def cmd_plan_effort(cfg: RunConfig) -> int:
    problem = _load(cfg)
    form = build_min_effort(problem)
    res = _solver(cfg).solve_lp(form.model)
    if res.status is Status.INFEASIBLE:
        _say(cfg, f"infeasible: the finish state cannot be reached in t_f = {problem.t_f}")
        return EXIT_INFEASIBLE
    if res.status is not Status.OPTIMAL:
        _say(cfg, f"solver stopped: {res.status.value}")
        return EXIT_LIMIT
    traj = form.trajectory(res)
    report = {"status": res.status.value, "objective": res.objective, "pivots": res.stats.pivots}
    _emit(cfg, _header(cfg, problem, report) + trajectory_csv(traj, cfg.points))
    if cfg.svg:
        from .plotting import plot_plan

        plot_plan(problem, traj, cfg.svg, title=f"minimum effort, J = {res.objective:.4f}")
    _say(cfg, f"optimal effort {res.objective:.6g}")
    return EXIT_OK


def cmd_plan_avoid(cfg: RunConfig) -> int:
    problem = _load(cfg)
    if not problem.obstacles:
        raise ProblemFileError("plan-avoid needs at least one obstacle")
    cfg.method = cfg.method or "iter-times"
    cfg.alpha = alg.DEFAULT_ALPHA if cfg.alpha is None else cfg.alpha
    solver = _solver(cfg)
    v_max = max_speed(problem.start)
    R_min = problem.min_radius
    if cfg.method == "uniform":
        cfg.dt = cfg.dt or alg.critical_sample_time(R_min, cfg.alpha, v_max)
        traj, report = alg.uniform_gridding(problem, cfg.alpha, cfg.dt, solver=solver, n_samples=cfg.samples)
    elif cfg.method == "uniform-2dtmin":
        cfg.dt = cfg.dt or 2.0 * alg.delta_t_min(cfg.alpha, R_min, v_max)
        traj, report = alg.uniform_gridding(problem, cfg.alpha, cfg.dt, solver=solver, n_samples=cfg.samples)
    elif cfg.method == "iter-times":
        initial = alg.uniform_grid_times(problem.t_f, cfg.dt, len(problem.obstacles)) if cfg.dt else None
        traj, report = alg.iterative_time_selection(problem, cfg.alpha, initial, solver=solver,
                                                    n_samples=cfg.samples)
    else:
        cfg.dt = cfg.dt or DEFAULT_GROW_DT
        times = alg.uniform_grid_times(problem.t_f, cfg.dt, len(problem.obstacles))
        traj, report = alg.obstacle_growing(problem, cfg.alpha, times, solver=solver, n_samples=cfg.samples)
    rep = report.as_dict()
    _write_report(cfg, rep)
    _emit(cfg, _header(cfg, problem, rep) + trajectory_csv(traj, cfg.points))
    if cfg.svg:
        from .plotting import plot_plan

        plot_plan(problem, traj, cfg.svg, times=report.times, radii=report.radii,
                  title=f"{cfg.method}: N_o = {report.n_avoid_times}")
    _say(cfg, f"{cfg.method}: {report.termination}, N_o = {report.n_avoid_times}, "
              f"iterations = {report.n_iterations}, nodes = {report.nodes}")
    return EXIT_OK


def cmd_plan_mintime(cfg: RunConfig) -> int:
    problem = _load(cfg)
    cfg.method = cfg.method or "bsearch"
    cfg.eps = 1e-3 if cfg.eps is None else cfg.eps
    solver = _solver(cfg)
    if cfg.method == "bsearch":
        t_lb, t_ub = alg.mintime_bounds(problem, solver=solver)
        res = alg.mintime_binary_search(problem, t_lb, t_ub, cfg.eps, solver=solver)
        t_star, traj, reports = res.t_star, res.trajectory, [res.report]
    elif cfg.method == "grid":
        cfg.dt = cfg.dt or DEFAULT_COARSE_T
        g = alg.mintime_grid(problem, cfg.dt, solver=solver)
        t_star, traj, reports = g.bracket[1], g.trajectory, [g.report]
    else:
        cfg.dt = cfg.dt or DEFAULT_COARSE_T
        h = alg.mintime_hybrid(problem, cfg.dt, cfg.eps, solver=solver)
        t_star, traj, reports = h.t_star, h.trajectory, [h.grid.report, h.search.report]
    rep = {"t_star": t_star, "phases": [r.as_dict() for r in reports]}
    _write_report(cfg, rep)
    _emit(cfg, _header(cfg, problem, rep) + trajectory_csv(traj, cfg.points))
    for r in reports:
        if r.k_sol is not None:
            _say(cfg, f"grid: k_sol = {r.k_sol}, bracket ({(r.k_sol - 1) * r.T:.6g}, {r.k_sol * r.T:.6g}]")
        for k, b in enumerate(r.brackets):
            _say(cfg, f"iter {k:2d}: ({b.t_L:.9f}, {b.t_R:.9f}]  width {b.width:.3e}")
        if not r.monotone:
            _say(cfg, "warning: feasibility was not monotone in the final time across probes")
    _say(cfg, f"t* = {t_star:.9f}" + (f" (eps {cfg.eps:g})" if cfg.method != "grid" else ""))
    if cfg.svg:
        from .plotting import plot_mintime

        plot_mintime(traj, cfg.svg, title=f"{cfg.method}: t* = {t_star:.4f}")
    return EXIT_OK


@dataclasses.dataclass
class BenchOverrides:
    methods: str | None = None
    n_obst: str | None = None
    instances: int | None = None
    budget: int | None = None
    workers: int | None = None
    wall_time: bool = False


def _study(cfg: RunConfig, ov: BenchOverrides) -> bench.StudyConfig:
    study = load_study(cfg.input) if cfg.input else bench.StudyConfig()
    changes = {}
    if cfg.seed is not None:
        changes["base_seed"] = cfg.seed
    if cfg.alpha is not None:
        changes["alpha"] = cfg.alpha
    if cfg.dt is not None:
        changes["grow_dt"] = cfg.dt
    if ov.methods or cfg.method:
        changes["methods"] = tuple((ov.methods or cfg.method).split(","))
    if ov.n_obst:
        changes["n_obst"] = tuple(int(v) for v in ov.n_obst.split(","))
    if ov.instances is not None:
        changes["n_instances"] = ov.instances
    if ov.budget is not None:
        changes["node_budget"] = ov.budget
    if ov.workers is not None:
        changes["workers"] = ov.workers
    if ov.wall_time:
        changes["wall_time"] = True
    return dataclasses.replace(study, **changes)


def cmd_bench(cfg: RunConfig, ov: BenchOverrides | None = None) -> int:
    study = _study(cfg, ov or BenchOverrides())
    records = bench.run_study(study)
    lines = _header(cfg) + ["# study: " + json.dumps(study.as_dict(), sort_keys=True)]
    summary = None
    if len({r.n_obst for r in records}) >= 2:
        summary = bench.scaling_summary(records)
        q = {f"{m}@{n}": v for (m, n), v in sorted(summary.quantiles.items())}
        lines.append("# quantile70_nodes: " + json.dumps(q, sort_keys=True))
        lines.append("# growth: " + json.dumps(summary.growth, sort_keys=True))
    _emit(cfg, lines + bench.records_to_csv(records).rstrip("\n").split("\n"))
    if cfg.svg and records:
        from .plotting import plot_study

        plot_study(records, summary, cfg.svg)
    solved = sum(r.success for r in records)
    _say(cfg, f"{len(records)} records, {solved} solved within budget")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="itermilp", description="MILP trajectory planning with iterative avoidance.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, methods=None):
        sp.add_argument("input", nargs="?", help="problem JSON file")
        sp.add_argument("--random", type=int, metavar="N_OBST", help="use a random instance instead of a file")
        sp.add_argument("--seed", type=int, help="seed for --random")
        sp.add_argument("--out", help="CSV output path (default: stdout)")
        sp.add_argument("--svg", help="SVG plot path")
        sp.add_argument("--report", help="JSON report path")
        sp.add_argument("--N-u", dest="N_u", type=int)
        sp.add_argument("--M-u", dest="M_u", type=int)
        sp.add_argument("--M-o", dest="M_o", type=int)
        sp.add_argument("--t-f", dest="t_f", type=_positive_float)
        sp.add_argument("--node-limit", type=int, default=alg.PLANNING_NODE_LIMIT)
        sp.add_argument("--solver", choices=("embedded", "highs"), default="embedded")
        sp.add_argument("--points", type=int, default=500, help="trajectory samples in the CSV")
        if methods:
            sp.add_argument("--method", choices=methods)

    sp = sub.add_parser("plan-effort", help="minimum-effort trajectory, obstacles ignored")
    common(sp)

    sp = sub.add_parser("plan-avoid", help="collision-avoiding trajectory")
    common(sp, AVOID_METHODS)
    sp.add_argument("--alpha", type=float, help="buffer growth factor (> 1)")
    sp.add_argument("--dt", type=_positive_float, help="avoidance-time spacing")
    sp.add_argument("--samples", type=int, help="collision-check samples")

    sp = sub.add_parser("plan-mintime", help="minimum-time trajectory")
    common(sp, MINTIME_METHODS)
    sp.add_argument("--eps", type=_positive_float, help="final bracket width (default 1e-3)")
    sp.add_argument("--dt", type=_positive_float, help="coarse sample time for grid and hybrid")

    sp = sub.add_parser("bench", help="random-instance effort study")
    sp.add_argument("input", nargs="?", help="study JSON file")
    sp.add_argument("--seed", type=int, help="base seed")
    sp.add_argument("--out", help="results CSV (default: stdout)")
    sp.add_argument("--svg", help="curves SVG")
    sp.add_argument("--method", help="comma-separated methods")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--dt", type=_positive_float, help="avoidance-time spacing for grow")
    sp.add_argument("--n-obst", help="comma-separated obstacle counts")
    sp.add_argument("--instances", type=int)
    sp.add_argument("--budget", type=int, help="node budget per instance and method")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--wall-time", action="store_true", help="record wall_ms (not reproducible)")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in fields and v is not None})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    cfg = _config(ns)
    try:
        if cfg.alpha is not None:
            alg._check_alpha(cfg.alpha)
        if cfg.command == "plan-effort":
            return cmd_plan_effort(cfg)
        if cfg.command == "plan-avoid":
            return cmd_plan_avoid(cfg)
        if cfg.command == "plan-mintime":
            return cmd_plan_mintime(cfg)
        ov = BenchOverrides(None, ns.n_obst, ns.instances, ns.budget, ns.workers, ns.wall_time)
        return cmd_bench(cfg, ov)
    except (alg.PlanningInfeasible, alg.UnreachableError) as exc:
        _write_report(cfg, exc.report.as_dict() if getattr(exc, "report", None) else None)
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (alg.BudgetExceeded, IndeterminateError, ModelTooLarge) as exc:
        _write_report(cfg, exc.report.as_dict() if getattr(exc, "report", None) else None)
        print(f"limit reached: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (ProblemFileError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
