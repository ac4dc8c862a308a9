"""Small MILP modelling layer with an embedded branch-and-bound solver."""
from .bnb import (
    EmbeddedSolver,
    FeasibilityResult,
    IndeterminateError,
    MILPSolver,
    ModelTooLarge,
    SolverConfig,
    check_feasible,
    solve_lp,
    solve_milp,
)
from .model import LPArrays, Model, Relation, SolveResult, SolveStats, Status, VarId

__all__ = [
    "EmbeddedSolver",
    "FeasibilityResult",
    "IndeterminateError",
    "LPArrays",
    "MILPSolver",
    "Model",
    "ModelTooLarge",
    "Relation",
    "SolveResult",
    "SolveStats",
    "SolverConfig",
    "Status",
    "VarId",
    "check_feasible",
    "solve_lp",
    "solve_milp",
]
