from pathlib import Path

import numpy as np
import pytest

from disappointment_lab.decision_problem import LossMatrix, Problem
from disappointment_lab.simplex_core import Distribution

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def coin():
    """The running instance: a single decision losing 1 on the second of two equally likely scenarios"""
    return Problem.from_values([[0.0, 1.0]], Distribution([0.5, 0.5]))


@pytest.fixture
def demo():
    """Decision A always loses 0.5, decision B loses 0 or 1"""
    return Problem.from_values(
        [[0.5, 0.5], [0.0, 1.0]], Distribution([0.5, 0.5]), decision_labels=["A", "B"],
        scenario_labels=["low", "high"]
    )


@pytest.fixture
def abs_deviation():
    return LossMatrix.from_function(lambda x, xi: abs(x - xi), np.linspace(-3.0, 3.0, 101), [-2, -1, 0, 1, 2])


@pytest.fixture
def scenarios_dir():
    return REPO_ROOT / "scenarios"


def random_interior(rng, d):
    weights = rng.uniform(0.05, 1.0, size=d)
    return Distribution(weights / weights.sum())


def random_problem(rng, n, d):
    return Problem(LossMatrix(rng.uniform(-1.0, 1.0, size=(n, d))))
