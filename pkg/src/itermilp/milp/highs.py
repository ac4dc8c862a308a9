"""Adapter that runs models through HiGHS (optional ``highspy`` dependency)."""
from __future__ import annotations

import os
import tempfile
import time

import numpy as np

from .bnb import FeasibilityResult, SolverConfig
from .lpfile import write_lp
from .model import Model, SolveResult, SolveStats, Status


class HighsSolver:
    """Same interface as the embedded solver, backed by HiGHS via an LP file."""

    def __init__(self, config: SolverConfig | None = None):
        import highspy  # noqa: F401  (fail early when the extra is missing)

        self.config = config or SolverConfig()

    def _run(self, model: Model, relax: bool, feasibility: bool) -> SolveResult:
        import highspy

        t0 = time.perf_counter()
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_max_nodes", self.config.node_limit)
        h.setOptionValue("primal_feasibility_tolerance", self.config.feasibility_tol)
        h.setOptionValue("mip_feasibility_tolerance", self.config.integrality_tol)
        fd, path = tempfile.mkstemp(suffix=".lp")
        os.close(fd)
        try:
            probe = model
            if feasibility and model.has_objective:
                probe = _without_objective(model)
            write_lp(probe, path, relax=relax)
            h.readModel(path)
        finally:
            os.unlink(path)
        h.run()
        status = h.getModelStatus()
        info = h.getInfo()
        stats = SolveStats(pivots=int(max(info.simplex_iteration_count, 0)),
                           nodes=int(max(info.mip_node_count, 0)), lp_solves=1,
                           wall_time=time.perf_counter() - t0)
        ms = highspy.HighsModelStatus
        if status == ms.kOptimal:
            # the reader numbers columns by first appearance, so map back by name
            x = np.zeros(model.n_vars)
            names = h.getLp().col_names_
            for name, v in zip(names, h.getSolution().col_value):
                x[int(name[1:])] = v
            st = Status.FEASIBLE if feasibility else Status.OPTIMAL
            obj = None if feasibility else float(model.objective_vector() @ x)
            return SolveResult(st, x, obj, stats)
        if status == ms.kInfeasible:
            return SolveResult(Status.INFEASIBLE, None, None, stats)
        if status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            return SolveResult(Status.UNBOUNDED, None, None, stats)
        return SolveResult(Status.ITERATION_LIMIT, None, None, stats)

    def solve_lp(self, model: Model) -> SolveResult:
        return self._run(model, relax=True, feasibility=False)

    def solve_milp(self, model: Model) -> SolveResult:
        return self._run(model, relax=False, feasibility=False)

    def check_feasible(self, model: Model) -> FeasibilityResult:
        res = self._run(model, relax=False, feasibility=True)
        status = Status.FEASIBLE if res.status is Status.UNBOUNDED else res.status
        return FeasibilityResult(status, res.values, res.stats)


def _without_objective(model: Model) -> Model:
    import copy

    m = copy.copy(model)
    m._objective = None
    return m
