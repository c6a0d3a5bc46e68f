import numpy as np
import pytest

from shapax.coalition import Partition
from shapax.data import Dataset
from shapax.model import parse_expression


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def interaction():
    """Three features with an interaction between the first two."""
    return parse_expression("x1 * x2 + 2*x3", 3)


@pytest.fixture
def background(rng):
    return Dataset(rng.normal(size=(12, 3)))


@pytest.fixture
def x_star():
    return np.array([1.0, -0.5, 2.0])


@pytest.fixture
def logistic():
    """Four feature logistic model with a nonlinear term."""
    return parse_expression("2 / (1 + exp(-(x1 - x2*x3 + 0.5*x4)))", 4)


@pytest.fixture
def background4(rng):
    return Dataset(rng.normal(size=(10, 4)))


@pytest.fixture
def grouping4():
    return Partition.from_lists([[0, 1], [2], [3]], 4)
