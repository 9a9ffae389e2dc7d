from dataclasses import dataclass
from itertools import product

import numpy as np
from aws_lambda_powertools import Logger
from scipy.spatial.distance import directed_hausdorff

import constants
from components.errors import ConfigurationError
from components.measures.geometry import Box, as_points
from components.measures.measure import DiscreteVectorMeasure, tv_norm

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)


def _multi_indices(count: int):
    # Enumerate (jx, jy, jz) by total degree, then lexicographically
    degree = 0
    while True:
        for index in sorted(j for j in product(range(degree + 1), repeat=3) if sum(j) == degree):
            yield index
        degree += 1


@dataclass(frozen=True)
class TestFunctionFamily:
    """
    Finite family of 3-vector test functions Phi_n = e_c * prod_i cos(pi j_i (t_i - lo_i) / len_i)
    on the bounding box of S. Every member has sup-norm exactly 1.
    """

    __test__ = False

    box: Box
    size: int = constants.TEST_FUNCTIONS

    def __post_init__(self):
        if self.size < 1:
            raise ConfigurationError("A test-function family needs at least one member")
        frequencies, components = [], []
        for index in _multi_indices(self.size):
            for component in range(3):
                frequencies.append(index)
                components.append(component)
                if len(frequencies) == self.size:
                    break
            if len(frequencies) == self.size:
                break
        object.__setattr__(self, "_frequencies", np.array(frequencies, dtype=float))
        object.__setattr__(self, "_components", np.array(components, dtype=np.int64))

    @property
    def frequencies(self) -> np.ndarray:
        return self._frequencies

    @property
    def components(self) -> np.ndarray:
        return self._components

    def scalar_factors(self, points) -> np.ndarray:
        """Scalar part of every Phi_n at every point, shape (size, n_points)."""
        points = as_points(points)
        phase = np.pi * (points - self.box.lower) / self.box.lengths
        return np.prod(np.cos(self.frequencies[:, None, :] * phase[None, :, :]), axis=2)

    def evaluate(self, points) -> np.ndarray:
        """Vector values Phi_n(x), shape (size, n_points, 3)."""
        scalars = self.scalar_factors(points)
        values = np.zeros(scalars.shape + (3,))
        values[np.arange(self.size), :, self.components] = scalars
        return values

    def pair(self, mu: DiscreteVectorMeasure) -> np.ndarray:
        """The pairings <Phi_n, mu> for every member."""
        if len(mu) == 0:
            return np.zeros(self.size)
        scalars = self.scalar_factors(mu.locations)
        return np.einsum("np,pn->n", scalars, mu.moments[:, self.components])


def r_distance_proxy(mu: DiscreteVectorMeasure, nu: DiscreteVectorMeasure, family: TestFunctionFamily) -> float:
    """
    Truncated R-distance between two measures.

    Args:
        mu (DiscreteVectorMeasure): First measure.
        nu (DiscreteVectorMeasure): Second measure.
        family (TestFunctionFamily): The test functions defining the weak-star part.

    Returns:
        float: sum_n 2^-n |t_n| / (1 + |t_n|) with t_n = <Phi_n, mu - nu>, plus | |mu|_TV - |nu|_TV |.
    """
    gap = np.abs(family.pair(mu) - family.pair(nu))
    weights = 0.5 ** np.arange(1, family.size + 1)
    weak = float(np.sum(weights * gap / (1.0 + gap)))
    return weak + abs(tv_norm(mu) - tv_norm(nu))


def truncation_bound(mu: DiscreteVectorMeasure, nu: DiscreteVectorMeasure, family: TestFunctionFamily) -> float:
    """Bound on the tail of the metric series dropped by r_distance_proxy."""
    return 0.5 ** family.size * min(1.0, tv_norm(mu) + tv_norm(nu))


def hausdorff_distance(X, Y) -> float:
    """
    Hausdorff distance between two finite point sets.

    Two empty sets are at distance 0; an empty and a nonempty set are at
    distance +inf, which callers flag in their reports.
    """
    X, Y = as_points(X), as_points(Y)
    if len(X) == 0 and len(Y) == 0:
        return 0.0
    if len(X) == 0 or len(Y) == 0:
        LOGGER.warning("Hausdorff distance against an empty set", extra={"sizes": [len(X), len(Y)]})
        return float("inf")
    return max(directed_hausdorff(X, Y)[0], directed_hausdorff(Y, X)[0])


def directed_distance(X, Y) -> float:
    """sup_{x in X} d(x, Y); 0 when X is empty, +inf when only Y is empty."""
    X, Y = as_points(X), as_points(Y)
    if len(X) == 0:
        return 0.0
    if len(Y) == 0:
        return float("inf")
    return float(directed_hausdorff(X, Y)[0])
