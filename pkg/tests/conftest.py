import numpy as np
import pytest

from core.geometry import Ball, Box, Interval, LShape
from core.measures import StableOperatorSpec, axis_measure, fractional_laplacian
from core.quadrature import QuadratureSpec


@pytest.fixture
def interval():
    return Interval(-1.0, 1.0)


@pytest.fixture
def unit_disc():
    return Ball([0.0, 0.0], 1.0)


@pytest.fixture
def lshape():
    return LShape(Box([-2.0, -2.0], [2.0, 2.0]), Box([0.0, 0.0], [1.0, 1.0]))


@pytest.fixture
def frac1():
    return fractional_laplacian(1, 0.5)


@pytest.fixture
def frac2():
    return fractional_laplacian(2, 0.5)


@pytest.fixture
def axes2():
    return StableOperatorSpec(0.5, axis_measure(2, 1.0))


@pytest.fixture
def quick_q():
    """Coarse rule: enough for smooth fields, cheap enough for unit tests"""
    return QuadratureSpec(panels_per_dyad=2, gauss_order=12, angular_nodes=64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
