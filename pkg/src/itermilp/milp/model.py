"""Mixed-integer linear program container and solve results."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence, Tuple, Union

import numpy as np

_model_ids = itertools.count(1)


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "=="


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"

    @property
    def has_solution(self) -> bool:
        return self in (Status.OPTIMAL, Status.FEASIBLE)


@dataclass(frozen=True)
class VarId:
    """Handle to a variable; only valid for the model that issued it."""

    model: int
    index: int


Terms = Union[Mapping[VarId, float], Iterable[Tuple[VarId, float]]]


@dataclass
class Constraint:
    cols: np.ndarray
    coefs: np.ndarray
    relation: Relation
    rhs: float
    name: str | None = None


@dataclass
class LPArrays:
    """Dense column/row-bounded form ``row_lo <= A x <= row_hi``."""

    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    c: np.ndarray
    binaries: np.ndarray


class Model:
    """A MILP: bounded continuous variables, binaries, linear rows, and an
    optional linear objective (always minimized)."""

    def __init__(self, name: str = ""):
        self.name = name
        self.uid = next(_model_ids)
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._binary: list[bool] = []
        self.var_names: list[str] = []
        self.constraints: list[Constraint] = []
        self._objective: dict[int, float] | None = None

    # variables -----------------------------------------------------------
    def add_continuous(self, lb: float = -math.inf, ub: float = math.inf,
                       name: str | None = None) -> VarId:
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub or lb == math.inf or ub == -math.inf:
            raise ValueError(f"invalid bounds [{lb}, {ub}]")
        return self._add(lb, ub, False, name)

    def add_binary(self, name: str | None = None) -> VarId:
        return self._add(0.0, 1.0, True, name)

    def _add(self, lb, ub, binary, name):
        index = len(self._lb)
        self._lb.append(lb)
        self._ub.append(ub)
        self._binary.append(binary)
        self.var_names.append(name or f"{'b' if binary else 'x'}{index}")
        return VarId(self.uid, index)

    @property
    def n_vars(self) -> int:
        return len(self._lb)

    @property
    def n_binaries(self) -> int:
        return sum(self._binary)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def bounds(self, var: VarId) -> tuple[float, float]:
        i = self._check(var)
        return self._lb[i], self._ub[i]

    def is_binary(self, var: VarId) -> bool:
        return self._binary[self._check(var)]

    # rows ----------------------------------------------------------------
    def add_constraint(self, terms: Terms, relation: Relation | str, rhs: float,
                       name: str | None = None) -> int:
        """Append ``sum(coef * var) <relation> rhs``; repeated vars are summed."""
        relation = Relation(relation)
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError("right-hand side must be finite")
        cols, coefs = self._collect(terms)
        self.constraints.append(Constraint(cols, coefs, relation, rhs, name))
        return len(self.constraints) - 1

    def set_objective(self, terms: Terms | None) -> None:
        if terms is None:
            self._objective = None
            return
        cols, coefs = self._collect(terms)
        self._objective = dict(zip(cols.tolist(), coefs.tolist()))

    @property
    def has_objective(self) -> bool:
        return self._objective is not None

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        if self._objective:
            for i, v in self._objective.items():
                c[i] = v
        return c

    def _check(self, var) -> int:
        if not isinstance(var, VarId) or var.model != self.uid or not 0 <= var.index < self.n_vars:
            raise ValueError(f"{var!r} does not belong to model {self.name or self.uid}")
        return var.index

    def _collect(self, terms: Terms):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, float] = {}
        for var, coef in items:
            i = self._check(var)
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError("coefficients must be finite")
            acc[i] = acc.get(i, 0.0) + coef
        cols = np.fromiter(acc.keys(), dtype=np.int64, count=len(acc))
        coefs = np.fromiter(acc.values(), dtype=np.float64, count=len(acc))
        return cols, coefs

    # export --------------------------------------------------------------
    def to_arrays(self) -> LPArrays:
        m, n = self.n_constraints, self.n_vars
        A = np.zeros((m, n))
        row_lo = np.full(m, -np.inf)
        row_hi = np.full(m, np.inf)
        for i, con in enumerate(self.constraints):
            A[i, con.cols] = con.coefs
            if con.relation is not Relation.GE:
                row_hi[i] = con.rhs
            if con.relation is not Relation.LE:
                row_lo[i] = con.rhs
        return LPArrays(
            A=A,
            row_lo=row_lo,
            row_hi=row_hi,
            col_lo=np.array(self._lb, dtype=float),
            col_hi=np.array(self._ub, dtype=float),
            c=self.objective_vector(),
            binaries=np.flatnonzero(np.array(self._binary, dtype=bool)),
        )

    def max_violation(self, values: Sequence[float]) -> float:
        """Largest bound or row violation of ``values``, row by row from the
        stored terms (independent of the dense solver form)."""
        x = np.asarray(values, dtype=float)
        if x.shape != (self.n_vars,):
            raise ValueError("assignment length does not match the model")
        worst = 0.0
        lb, ub = np.array(self._lb), np.array(self._ub)
        if self.n_vars:
            worst = max(worst, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        for con in self.constraints:
            lhs = math.fsum(c * x[i] for i, c in zip(con.cols.tolist(), con.coefs.tolist()))
            if con.relation is Relation.LE:
                worst = max(worst, lhs - con.rhs)
            elif con.relation is Relation.GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst

    def __repr__(self) -> str:
        return (f"Model({self.name!r}, vars={self.n_vars}, binaries={self.n_binaries}, "
                f"rows={self.n_constraints})")


@dataclass
class SolveStats:
    pivots: int = 0
    nodes: int = 0
    lp_solves: int = 0
    wall_time: float = 0.0

    def add(self, other: "SolveStats") -> None:
        self.pivots += other.pivots
        self.nodes += other.nodes
        self.lp_solves += other.lp_solves
        self.wall_time += other.wall_time


@dataclass
class SolveResult:
    status: Status
    values: np.ndarray | None = None
    objective: float | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    def __getitem__(self, var: VarId) -> float:
        if self.values is None:
            raise ValueError(f"no assignment available (status {self.status.value})")
        return float(self.values[var.index])

    def value(self, var: VarId) -> float:
        return self[var]

    def values_of(self, vars: Sequence[VarId]) -> np.ndarray:
        if self.values is None:
            raise ValueError(f"no assignment available (status {self.status.value})")
        return self.values[[v.index for v in vars]]
