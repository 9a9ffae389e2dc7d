from dataclasses import dataclass
from typing import Tuple

import numpy as np

from components.errors import ConfigurationError, DomainError


def as_points(points) -> np.ndarray:
    """
    Coerce a point or a list of points into a float (n, 3) array.

    Args:
        points: A single 3-vector or anything array-like of shape (n, 3).

    Returns:
        np.ndarray: The points as a contiguous (n, 3) float array.
    """
    array = np.asarray(points, dtype=float)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.size == 0:
        return np.zeros((0, 3))
    if array.ndim != 2 or array.shape[1] != 3:
        raise DomainError(f"Expected points of shape (n, 3), got {array.shape}")
    return np.ascontiguousarray(array)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi] in meters, the source region S."""

    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ConfigurationError("Box corners must be 3-vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigurationError("Box corners must be finite")
        if np.any(hi <= lo):
            raise ConfigurationError(f"Degenerate box: lo={tuple(lo)}, hi={tuple(hi)}")
        object.__setattr__(self, "lo", tuple(float(t) for t in lo))
        object.__setattr__(self, "hi", tuple(float(t) for t in hi))

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, points) -> np.ndarray:
        points = as_points(points)
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from each point to the box (zero inside)."""
        points = as_points(points)
        excess = np.maximum(self.lower - points, 0.0) + np.maximum(points - self.upper, 0.0)
        return np.linalg.norm(excess, axis=1)


@dataclass(frozen=True)
class VoxelPartition:
    """
    Uniform voxel partition of a box.

    Cells are half-open [lo, hi) along every axis, except that cells touching the
    region's max faces are closed there, so every point of the region belongs to
    exactly one cell. Cell k has multi-index (ix, iy, iz) in C order.
    """

    region: Box
    resolution: Tuple[int, int, int]

    def __post_init__(self):
        resolution = tuple(int(n) for n in self.resolution)
        if len(resolution) != 3 or min(resolution) < 1:
            raise ConfigurationError(f"Resolution must be three positive integers, got {self.resolution}")
        object.__setattr__(self, "resolution", resolution)

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def cell_size(self) -> np.ndarray:
        return self.region.lengths / np.array(self.resolution)

    @property
    def mesh_size(self) -> float:
        """Diameter of one cell, the partition's a."""
        return float(np.linalg.norm(self.cell_size))

    def multi_index(self, points) -> np.ndarray:
        points = as_points(points)
        inside = self.region.contains(points)
        if not np.all(inside):
            bad = int(np.flatnonzero(~inside)[0])
            raise DomainError(
                f"Point {tuple(points[bad])} lies outside the region {self.region.lo}..{self.region.hi}"
            )
        index = np.floor((points - self.region.lower) / self.cell_size).astype(np.int64)
        return np.minimum(index, np.array(self.resolution) - 1)

    def locate(self, points) -> np.ndarray:
        """Cell index of each point."""
        index = self.multi_index(points)
        if len(index) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(index.T, self.resolution)

    def centers(self) -> np.ndarray:
        axes = [
            lo + (np.arange(n) + 0.5) * h
            for lo, n, h in zip(self.region.lo, self.resolution, self.cell_size)
        ]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def corners(self, cells) -> np.ndarray:
        """The eight corners of each requested cell, shape (n, 8, 3)."""
        index = np.stack(np.unravel_index(np.asarray(cells, dtype=np.int64), self.resolution), axis=1)
        lower = self.region.lower + index * self.cell_size
        offsets = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float)
        return lower[:, None, :] + offsets[None, :, :] * self.cell_size

    def refined(self, factor: int) -> "VoxelPartition":
        return VoxelPartition(self.region, tuple(n * factor for n in self.resolution))
