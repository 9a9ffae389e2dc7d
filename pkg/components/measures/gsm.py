from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from components.errors import ConfigurationError, DomainError
from components.measures.geometry import Box, VoxelPartition, as_points
from components.measures.measure import DiscreteVectorMeasure


def _point_key(point: np.ndarray) -> Tuple[float, float, float]:
    return (float(point[0]), float(point[1]), float(point[2]))


@dataclass(frozen=True, eq=False)
class DipoleGsmSpace:
    """
    Space of measures sum_k m_k delta_{x_k} over a fixed node set.

    Nodes 0..num_cells-1 sit one per voxel of the partition (cell centers by default).
    Nodes from num_cells on are pinned: each owns the singleton cell {x}, and the
    voxel containing it keeps only its own node. Pinned nodes never coincide with a
    voxel node, so the induced partition stays compatible with the node set.
    """

    partition: VoxelPartition
    nodes: np.ndarray

    def __post_init__(self):
        nodes = as_points(self.nodes)
        if len(nodes) < self.partition.num_cells:
            raise ConfigurationError(
                f"Need one node per cell ({self.partition.num_cells}), got {len(nodes)}"
            )
        cells = self.partition.locate(nodes[: self.partition.num_cells])
        if not np.array_equal(cells, np.arange(self.partition.num_cells)):
            bad = int(np.flatnonzero(cells != np.arange(self.partition.num_cells))[0])
            raise ConfigurationError(f"Node {bad} at {tuple(nodes[bad])} is not inside cell {bad}")
        if not np.all(self.partition.region.contains(nodes)):
            raise ConfigurationError("Pinned nodes must lie inside the region")
        if len(np.unique(nodes, axis=0)) != len(nodes):
            raise ConfigurationError("Nodes must be pairwise distinct")

        nodes = np.array(nodes)
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(
            self,
            "_pinned",
            {_point_key(p): self.partition.num_cells + i for i, p in enumerate(nodes[self.partition.num_cells:])},
        )

    @classmethod
    def regular(cls, region: Box, resolution, pinned=None) -> "DipoleGsmSpace":
        """Cell-center nodes on a uniform grid, plus optional pinned nodes."""
        partition = VoxelPartition(region, resolution)
        nodes = partition.centers()
        if pinned is not None and len(pinned):
            nodes = np.concatenate([nodes, as_points(pinned)])
        return cls(partition, nodes)

    @property
    def region(self) -> Box:
        return self.partition.region

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_cells(self) -> int:
        return self.partition.num_cells

    @property
    def mesh_size(self) -> float:
        return self.partition.mesh_size

    @property
    def pinned_nodes(self) -> np.ndarray:
        return self.nodes[self.num_cells:]

    def cell_of(self, points) -> np.ndarray:
        """Index of the node whose cell contains each point."""
        points = as_points(points)
        target = self.partition.locate(points)
        if self._pinned:
            for i, point in enumerate(points):
                pinned = self._pinned.get(_point_key(point))
                if pinned is not None:
                    target[i] = pinned
        return target

    def node_index(self, points) -> np.ndarray:
        """Index of the node located exactly at each point, -1 where there is none."""
        points = as_points(points)
        if len(points) == 0:
            return np.zeros(0, dtype=np.int64)
        target = self.cell_of(points)
        hit = np.all(self.nodes[target] == points, axis=1)
        return np.where(hit, target, -1)

    def moments_of(self, mu: DiscreteVectorMeasure) -> np.ndarray:
        """
        Node moments of a node-supported measure, shape (num_nodes, 3).

        Raises:
            DomainError: If an atom does not sit on a node.
        """
        index = self.node_index(mu.locations)
        if np.any(index < 0):
            bad = int(np.flatnonzero(index < 0)[0])
            raise DomainError(
                f"Atom at {tuple(mu.locations[bad])} is not a node of the space; project it first"
            )
        moments = np.zeros((self.num_nodes, 3))
        moments[index] = mu.moments
        return moments

    def measure(self, moments) -> DiscreteVectorMeasure:
        """The element sum_k m_k delta_{node_k} of the space."""
        moments = np.asarray(moments, dtype=float).reshape(self.num_nodes, 3)
        active = np.any(moments != 0.0, axis=1)
        return DiscreteVectorMeasure(self.nodes[active], moments[active], self.region)

    def covering_radius(self) -> float:
        """
        Upper bound on sup_x d(x, nodes) over the region: the farthest cell corner
        from the cell's own node.
        """
        cells = np.arange(self.num_cells)
        corners = self.partition.corners(cells)
        reach = np.linalg.norm(corners - self.nodes[cells][:, None, :], axis=2)
        return float(reach.max())


def project_onto_gsm(mu: DiscreteVectorMeasure, space: DipoleGsmSpace) -> DiscreteVectorMeasure:
    """
    Project a measure onto a GSM space along its compatible partition,
    P(mu) = sum_k mu(E_k) delta_{node_k}.

    Args:
        mu (DiscreteVectorMeasure): The measure to project.
        space (DipoleGsmSpace): The target space.

    Returns:
        DiscreteVectorMeasure: One atom per cell with nonzero net moment.

    Raises:
        DomainError: If an atom lies outside the partition's region.
    """
    if len(mu) == 0:
        return DiscreteVectorMeasure.empty(space.region)
    target = space.cell_of(mu.locations)
    moments = np.zeros((space.num_nodes, 3))
    np.add.at(moments, target, mu.moments)
    return space.measure(moments)
