from dataclasses import dataclass

import numpy as np

from components.errors import ConfigurationError
from components.measures import Box, as_points


@dataclass(frozen=True, eq=False)
class SensorGrid:
    """
    Sensor locations in Q with quadrature weights for rho and the sensing direction v.
    """

    points: np.ndarray
    weights: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        points = as_points(self.points)
        weights = np.asarray(self.weights, dtype=float).ravel()
        direction = np.asarray(self.direction, dtype=float).ravel()
        if len(points) == 0:
            raise ConfigurationError("A sensor grid needs at least one sensor")
        if len(weights) != len(points):
            raise ConfigurationError(f"Got {len(points)} sensors but {len(weights)} weights")
        if not np.all(np.isfinite(points)):
            raise ConfigurationError("Sensor locations must be finite")
        if not (np.all(np.isfinite(weights)) and np.all(weights > 0)):
            raise ConfigurationError("Sensor weights must be finite and positive")
        if direction.shape != (3,) or abs(np.linalg.norm(direction) - 1.0) > 1e-12:
            raise ConfigurationError(f"Sensing direction must be a unit 3-vector, got {direction}")
        for name, value in (("points", points), ("weights", weights), ("direction", direction)):
            value = np.array(value)
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return len(self.points)

    def check_separation(self, region: Box, gap: float) -> None:
        """
        Raises:
            ConfigurationError: If a sensor is closer than `gap` to the source region.
        """
        distance = region.distance(self.points)
        if np.any(distance < gap):
            bad = int(np.argmin(distance))
            raise ConfigurationError(
                f"Sensor {bad} at {tuple(self.points[bad])} is {distance[bad]:.6g} m from the "
                f"source region, closer than the required gap {gap:.6g} m"
            )


def planar_sensor_grid(extent, shape, height: float, direction=(0.0, 0.0, 1.0)) -> SensorGrid:
    """
    Rectangular sensor grid on the plane z = height with uniform weights.

    Args:
        extent: (x0, x1, y0, y1) in meters.
        shape: (nx, ny) sensors per axis.
        height (float): Plane height in meters.
        direction: Sensing direction, normalized here.

    Returns:
        SensorGrid: Grid with weights area / num_sensors.
    """
    x0, x1, y0, y1 = (float(t) for t in extent)
    nx, ny = (int(n) for n in shape)
    if nx < 1 or ny < 1 or x1 < x0 or y1 < y0:
        raise ConfigurationError(f"Invalid sensor grid extent {extent} / shape {shape}")
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([(x0 + x1) / 2])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([(y0 + y1) / 2])
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(height))], axis=1)
    area = (x1 - x0) * (y1 - y0)
    weight = area / len(points) if area > 0 else 1.0 / len(points)
    direction = np.asarray(direction, dtype=float)
    return SensorGrid(points, np.full(len(points), weight), direction / np.linalg.norm(direction))
