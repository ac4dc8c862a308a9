"""Problem and study files (JSON, validated against the bundled schema)."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .bench import InstanceParams, StudyConfig
from .dynamics import State
from .formulations import DEFAULT_H, EPS_STRICT, Obstacle, Problem


class ProblemFileError(ValueError):
    """The file is unreadable, not JSON, or does not match the schema."""


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("itermilp").joinpath("schemas/problem.schema.json").read_text()
    return json.loads(text)


def validate(doc) -> None:
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemFileError(f"{where}: {exc.message}") from None


def read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    validate(doc)
    return doc


def problem_from_dict(doc: dict) -> Problem:
    validate(doc)
    obstacles = tuple(
        Obstacle(tuple(o["center"]), o["radius"], tuple(o.get("velocity", (0.0, 0.0))))
        for o in doc.get("obstacles", ())
    )
    try:
        return Problem(
            start=State.from_array(doc["start"]),
            finish=State.from_array(doc["finish"]),
            t_f=float(doc["t_f"]),
            N_u=int(doc.get("N_u", 10)),
            M_u=int(doc.get("M_u", 10)),
            M_o=int(doc.get("M_o", 10)),
            obstacles=obstacles,
            H=float(doc.get("H", DEFAULT_H)),
            eps_strict=float(doc.get("eps_strict", EPS_STRICT)),
        )
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None


def problem_to_dict(problem: Problem) -> dict:
    obstacles = []
    for o in problem.obstacles:
        d = {"center": list(o.center), "radius": o.radius}
        if o.velocity != (0.0, 0.0):
            d["velocity"] = list(o.velocity)
        obstacles.append(d)
    return {
        "start": problem.start.as_array().tolist(),
        "finish": problem.finish.as_array().tolist(),
        "t_f": problem.t_f,
        "N_u": problem.N_u,
        "M_u": problem.M_u,
        "M_o": problem.M_o,
        "H": problem.H,
        "eps_strict": problem.eps_strict,
        "obstacles": obstacles,
    }


def load_problem(path) -> Problem:
    return problem_from_dict(read_json(path))


def save_problem(problem: Problem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2) + "\n")


_PARAM_KEYS = ("r_v", "R_obst", "r", "R_s", "R_f", "max_draws")
_STUDY_KEYS = ("methods", "n_obst", "n_instances", "node_budget", "alpha", "grow_dt",
               "base_seed", "workers", "wall_time")


def study_from_dict(doc: dict) -> StudyConfig:
    """The problem fields act as the instance template; ``study`` holds the rest."""
    validate(doc)
    study = doc.get("study", {})
    params = {k: tuple(study[k]) if isinstance(study[k], list) else study[k]
              for k in _PARAM_KEYS if k in study}
    params.update(
        start_xy=tuple(doc["start"][:2]),
        finish_xy=tuple(doc["finish"][:2]),
        t_f=float(doc["t_f"]),
        N_u=int(doc.get("N_u", 10)),
        M_u=int(doc.get("M_u", 10)),
        M_o=int(doc.get("M_o", 10)),
    )
    kw = {k: tuple(study[k]) if isinstance(study[k], list) else study[k]
          for k in _STUDY_KEYS if k in study}
    try:
        return StudyConfig(params=InstanceParams(**params), **kw)
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None


def load_study(path) -> StudyConfig:
    return study_from_dict(read_json(path))
