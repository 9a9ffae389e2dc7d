import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.errors import DimensionError
from components.forward.kernel import dipole_kernel, field_at
from components.forward.sensors import SensorGrid
from components.measures import DipoleGsmSpace, DiscreteVectorMeasure, as_points

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

# Bytes of kernel evaluations held at once by matrix-free products
_CHUNK_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True, eq=False)
class ForwardModel:
    """
    Matrix realization of the forward operator A on a dipole GSM space.

    Column block 3k..3k+2 holds -scale * K_v(x_i - node_k) for every sensor i, so
    applying the matrix to stacked node moments gives b_v at the sensors. The data
    space carries the weighted inner product <g, h>_H = sum_i w_i g_i h_i.
    When `matrix` is None the model is matrix-free and recomputes kernel blocks.
    """

    sensors: SensorGrid
    space: DipoleGsmSpace
    scale: float
    matrix: Optional[np.ndarray] = None

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)

    @property
    def num_nodes(self) -> int:
        return self.space.num_nodes

    @property
    def weights(self) -> np.ndarray:
        return self.sensors.weights

    def inner(self, g, h) -> float:
        return float(np.sum(self.weights * np.asarray(g) * np.asarray(h)))

    def norm(self, g) -> float:
        return float(np.sqrt(max(self.inner(g, g), 0.0)))

    def column_blocks(self, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Kernel blocks for nodes start..stop, shape (num_sensors, n, 3)."""
        nodes = self.space.nodes[start:stop]
        displacement = self.sensors.points[:, None, :] - nodes[None, :, :]
        return -self.scale * dipole_kernel(displacement, self.sensors.direction)

    def _chunks(self):
        step = max(1, _CHUNK_BYTES // (24 * self.num_sensors))
        for start in range(0, self.num_nodes, step):
            yield start, min(start + step, self.num_nodes)

    def _moments(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if m.size != 3 * self.num_nodes:
            raise DimensionError(f"Expected {3 * self.num_nodes} stacked moments, got {m.size}")
        return m.reshape(self.num_nodes, 3)

    def _sensor_vector(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float).ravel()
        if g.size != self.num_sensors:
            raise DimensionError(f"Expected a vector of {self.num_sensors} sensor values, got {g.size}")
        return g

    def apply(self, m) -> np.ndarray:
        """A applied to stacked node moments, shape (num_sensors,)."""
        moments = self._moments(m)
        if self.matrix is not None:
            return self.matrix @ moments.ravel()
        out = np.zeros(self.num_sensors)
        for start, stop in self._chunks():
            out += np.einsum("ikc,kc->i", self.column_blocks(start, stop), moments[start:stop])
        return out

    def adjoint_apply(self, g) -> np.ndarray:
        """A*g sampled at the nodes, shape (num_nodes, 3)."""
        weighted = self.weights * self._sensor_vector(g)
        if self.matrix is not None:
            return (self.matrix.T @ weighted).reshape(self.num_nodes, 3)
        out = np.zeros((self.num_nodes, 3))
        for start, stop in self._chunks():
            out[start:stop] = np.einsum("ikc,i->kc", self.column_blocks(start, stop), weighted)
        return out

    def adjoint_field_at(self, g, points) -> np.ndarray:
        """A*g as a continuous field on S, evaluated at arbitrary points, shape (n, 3)."""
        weighted = self.weights * self._sensor_vector(g)
        points = as_points(points)
        out = np.zeros((len(points), 3))
        step = max(1, _CHUNK_BYTES // (24 * self.num_sensors))
        for start in range(0, len(points), step):
            displacement = self.sensors.points[:, None, :] - points[None, start:start + step, :]
            kernel = -self.scale * dipole_kernel(displacement, self.sensors.direction)
            out[start:start + step] = np.einsum("ipc,i->pc", kernel, weighted)
        return out

    def simulate(self, mu: DiscreteVectorMeasure) -> np.ndarray:
        """A applied to an arbitrary atomic measure by direct kernel summation."""
        return field_at(mu, self.sensors.points, self.sensors.direction, self.scale)

    def operator_norm_sq(self, iters: int = 30) -> float:
        """Power-iteration estimate of ||A||^2 for the weighted data norm."""
        x = np.ones(3 * self.num_nodes) / np.sqrt(3 * self.num_nodes)
        estimate = 0.0
        for _ in range(iters):
            y = self.adjoint_apply(self.apply(x)).ravel()
            estimate = float(np.linalg.norm(y))
            if estimate == 0.0:
                return 0.0
            x = y / estimate
        return estimate

    def content_hash(self) -> str:
        return model_key(self.space, self.sensors, self.scale)


def model_key(space: DipoleGsmSpace, sensors: SensorGrid, scale: float) -> str:
    digest = hashlib.sha256()
    digest.update(repr((space.region.lo, space.region.hi, space.partition.resolution)).encode())
    digest.update(np.ascontiguousarray(space.nodes).tobytes())
    digest.update(np.ascontiguousarray(sensors.points).tobytes())
    digest.update(np.ascontiguousarray(sensors.weights).tobytes())
    digest.update(np.ascontiguousarray(sensors.direction).tobytes())
    digest.update(repr(float(scale)).encode())
    return digest.hexdigest()


def assemble(
    space: DipoleGsmSpace,
    sensors: SensorGrid,
    scale: float = constants.SCALE,
    gap: Optional[float] = None,
    max_matrix_bytes: int = constants.MAX_MATRIX_BYTES,
) -> ForwardModel:
    """
    Assemble the forward operator restricted to a GSM space.

    Args:
        space (DipoleGsmSpace): Source nodes.
        sensors (SensorGrid): Measurement points, weights and direction.
        scale (float): The mu0/4pi constant (1 for unit tests).
        gap (float): Minimum sensor/source separation, one voxel diagonal by default.
        max_matrix_bytes (int): Above this size the model stays matrix-free.

    Returns:
        ForwardModel: The assembled model.

    Raises:
        ConfigurationError: If a sensor violates the separation gap.
    """
    sensors.check_separation(space.region, space.mesh_size if gap is None else gap)
    model = ForwardModel(sensors=sensors, space=space, scale=float(scale))
    size = 8 * 3 * len(sensors) * space.num_nodes
    if size > max_matrix_bytes:
        LOGGER.info("Forward model left matrix-free", extra={"bytes": size, "nodes": space.num_nodes})
        return model

    matrix = np.empty((len(sensors), 3 * space.num_nodes))
    for start, stop in model._chunks():
        matrix[:, 3 * start:3 * stop] = model.column_blocks(start, stop).reshape(len(sensors), -1)
    matrix.flags.writeable = False
    LOGGER.debug("Assembled forward model", extra={"sensors": len(sensors), "nodes": space.num_nodes})
    return ForwardModel(sensors=sensors, space=space, scale=float(scale), matrix=matrix)
