import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from itermilp.dynamics import State
from itermilp.formulations import Obstacle, Problem

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def corridor_problem():
    """Short transfer with one obstacle sitting on the straight line."""
    return Problem(
        start=State(-1.0, 0.0, 0.0, 0.0),
        finish=State(1.0, 0.0, 0.0, 0.0),
        t_f=4.0,
        obstacles=(Obstacle((0.0, 0.05), 0.3),),
    )


@pytest.fixture
def open_problem():
    return Problem(start=State(0.0, 0.0, 0.5, 0.0), finish=State(1.0, 1.0, 0.0, 0.0), t_f=4.0)
