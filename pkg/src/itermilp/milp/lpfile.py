"""Export a Model in the CPLEX LP text format, readable by most external solvers."""
from __future__ import annotations

import math
from pathlib import Path

from .model import Model, Relation

_SENSE = {Relation.LE: "<=", Relation.GE: ">=", Relation.EQ: "="}


def _num(v: float) -> str:
    return repr(float(v))


def _expr(cols, coefs) -> str:
    parts = []
    for j, a in zip(cols, coefs):
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_num(abs(a))} x{j}")
    if not parts:
        return "0 x0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def to_lp_string(model: Model, relax: bool = False) -> str:
    """Variables are written as ``x<index>`` and rows as ``c<index>`` so the
    file maps back onto the model by position."""
    n = model.n_vars
    arrays = model.to_arrays()
    is_bin = set(arrays.binaries.tolist())
    lines = [f"\\ {model.name}"] if model.name else []
    lines.append("Minimize")
    obj = arrays.c
    cols = [j for j in range(n) if obj[j] != 0.0]
    lines.append(" obj: " + (_expr(cols, obj[cols]) if cols else ("0 x0" if n else "")))
    lines.append("Subject To")
    for i, con in enumerate(model.constraints):
        lines.append(f" c{i}: {_expr(con.cols, con.coefs)} {_SENSE[con.relation]} {_num(con.rhs)}")
    lines.append("Bounds")
    binaries = []
    for j in range(n):
        lb, ub = float(arrays.col_lo[j]), float(arrays.col_hi[j])
        if j in is_bin and not relax:
            binaries.append(f"x{j}")
            continue
        if lb == -math.inf and ub == math.inf:
            lines.append(f" x{j} free")
        elif ub == math.inf:
            lines.append(f" x{j} >= {_num(lb)}")
        elif lb == -math.inf:
            lines.append(f" -inf <= x{j} <= {_num(ub)}")
        else:
            lines.append(f" {_num(lb)} <= x{j} <= {_num(ub)}")
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {b}" for b in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: Model, path, relax: bool = False) -> None:
    Path(path).write_text(to_lp_string(model, relax))
