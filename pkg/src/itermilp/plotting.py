"""SVG figures: planned paths with obstacles, and effort curves."""
from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import METHODS, BenchRecord, ScalingSummary, fraction_solved_curve  # noqa: E402
from .dynamics import Trajectory  # noqa: E402
from .formulations import AvoidanceTimeSet, Problem, obstacle_polygon  # noqa: E402

# fixed ids and no timestamp keep repeated SVG output byte-identical
plt.rcParams["svg.hashsalt"] = "itermilp"
_META = {"Date": None}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def _closed(poly: np.ndarray) -> np.ndarray:
    return np.vstack([poly, poly[:1]])


def plot_plan(problem: Problem, traj: Trajectory | None, path, *,
              times: AvoidanceTimeSet | None = None, radii: Sequence[float] | None = None,
              title: str = "", n_points: int = 500) -> None:
    """Obstacles as circles, buffer regions as dashed polygons, and a cross
    on the path at every avoidance time."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for j, o in enumerate(problem.obstacles):
        c = o.center_at(0.0)
        ax.add_patch(plt.Circle(c, o.radius, fill=False, color="k", lw=1.2))
        if radii is not None and radii[j] > o.radius:
            poly = obstacle_polygon(o, 0.0, problem.M_o, radii[j]).vertices()
            ax.plot(*_closed(poly).T, "k--", lw=0.8)
    if traj is not None:
        t = np.linspace(0.0, traj.end_time, n_points)
        p = traj.positions(t)
        ax.plot(p[:, 0], p[:, 1], "b-", lw=1.5)
        if times is not None and times.n_times:
            q = traj.positions(np.array(times.times))
            ax.plot(q[:, 0], q[:, 1], "rx", ms=6)
    ax.plot(*problem.start.position, "ko", ms=5)
    ax.plot(*problem.finish.position, "ks", ms=5)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_mintime(traj: Trajectory, path, *, title: str = "", n_points: int = 500) -> None:
    """Path plus the input and velocity histories."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    t = np.linspace(0.0, traj.end_time, n_points)
    s = traj.sample(t)
    a1.plot(s[:, 0], s[:, 1], "b-")
    a1.plot(*traj.start.position, "ko")
    a1.set_aspect("equal")
    a1.set_xlabel("x")
    a1.set_ylabel("y")
    k = traj.grid.step_index(t)
    u = traj.schedule.inputs[k]
    a2.step(t, u[:, 0], where="post", label="ux")
    a2.step(t, u[:, 1], where="post", label="uy")
    a2.plot(t, s[:, 2], ":", label="vx")
    a2.plot(t, s[:, 3], ":", label="vy")
    a2.set_xlabel("t")
    a2.legend(loc="best")
    if title:
        fig.suptitle(title)
    _save(fig, path)


def plot_study(records: Sequence[BenchRecord], summary: ScalingSummary | None, path,
               metric: str = "nodes") -> None:
    """Fraction solved vs effort per (method, N_obst), and the quantile scaling panel."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    methods = [m for m in METHODS if any(r.method == m for r in records)]
    n_values = sorted({r.n_obst for r in records})
    styles = ["-", "--", ":", "-."]
    for mi, m in enumerate(methods):
        for ni, n in enumerate(n_values):
            if not any(r.method == m and r.n_obst == n for r in records):
                continue
            pts = fraction_solved_curve(records, m, metric, n)
            if not pts:
                continue
            x = [pts[0][0]] + [e for e, _ in pts]
            y = [0.0] + [f for _, f in pts]
            a1.step(x, y, where="post", ls=styles[mi % 4], color=f"C{ni}", label=f"{m}, N={n}")
    a1.set_xscale("log")
    a1.set_xlabel(metric)
    a1.set_ylabel("fraction solved")
    a1.set_ylim(0, 1.02)
    a1.legend(fontsize=7, loc="lower right")
    if summary is not None:
        for mi, m in enumerate(methods):
            pts = [(n, v) for (mm, n), v in sorted(summary.quantiles.items()) if mm == m and math.isfinite(v)]
            if pts:
                a2.plot(*zip(*pts), marker="o", ls=styles[mi % 4], label=m)
        a2.set_yscale("log")
        a2.set_xlabel("number of obstacles")
        a2.set_ylabel(f"{int(round(summary.q * 100))}% quantile of {metric}")
        a2.legend(fontsize=8)
    _save(fig, path)
