import numpy as np
import pytest

from components.forward import assemble, planar_sensor_grid
from components.measures import Box, DipoleGsmSpace
from components.solver import SolveOptions

# Source box shared by the small instances
REGION = Box((0.0, 0.0, -0.5), (1.0, 1.0, 0.0))

# Tolerances used where results are compared against each other
TIGHT = SolveOptions(certificate_tol=1e-9, objective_tol=1e-16, max_iters=100000)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def region():
    return REGION


@pytest.fixture
def tight_options():
    return TIGHT


@pytest.fixture
def make_model():
    """Factory for small assembled models over REGION with unit scale."""

    def factory(
        resolution=(2, 2, 1),
        shape=(6, 6),
        height=0.6,
        extent=(-0.5, 1.5, -0.5, 1.5),
        direction=(0.0, 0.0, 1.0),
        gap=0.05,
        matrix_free=False,
    ):
        space = DipoleGsmSpace.regular(REGION, resolution)
        sensors = planar_sensor_grid(extent, shape, height, direction)
        return assemble(space, sensors, 1.0, gap=gap, max_matrix_bytes=0 if matrix_free else 1 << 30)

    return factory


@pytest.fixture
def random_moments():
    """Factory for (K, 3) node moments with `count` random active nodes."""

    def factory(rng, num_nodes, count):
        moments = np.zeros((num_nodes, 3))
        picks = rng.choice(num_nodes, size=count, replace=False)
        moments[picks] = rng.normal(size=(count, 3))
        return moments

    return factory
