from dataclasses import dataclass

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.certificate.report import CertificateReport
from components.errors import ConfigurationError
from components.forward import ForwardModel
from components.measures import DiscreteVectorMeasure, VoxelPartition

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

DEFAULT_BAND = 1e-3


@dataclass(frozen=True, eq=False)
class LevelSetSample:
    """
    Dual-field magnitude g(x) = |A*(f - A mu)|(x) on a grid finer than the node grid.

    Attributes:
        points: (P, 3) fine-grid cell centers followed by the space's nodes.
        values: (P,) magnitudes g at the points.
        cells: (P,) coarse partition cell containing each point.
        node: (P,) node index for points that are nodes, -1 elsewhere.
        resolution: Resolution of the fine grid.
        spacing: Diagonal of one fine sample cell.
    """

    points: np.ndarray
    values: np.ndarray
    cells: np.ndarray
    node: np.ndarray
    resolution: tuple
    spacing: float

    def members(self, alpha: float, band: float) -> np.ndarray:
        return np.abs(self.values - alpha) <= band


def dual_field_sample(model: ForwardModel, f, mu: DiscreteVectorMeasure, resolution) -> LevelSetSample:
    """
    Sample the dual field of mu on a fine grid.

    Args:
        model (ForwardModel): Forward model over the GSM space.
        f: Data vector.
        mu (DiscreteVectorMeasure): Candidate measure.
        resolution: Fine grid resolution, at least twice the node grid per axis.

    Returns:
        LevelSetSample: Magnitudes at the fine grid centers and at every node.

    Raises:
        ConfigurationError: If the resolution is not fine enough.
    """
    partition = model.space.partition
    resolution = tuple(int(n) for n in resolution)
    if len(resolution) != 3 or any(n < 2 * c for n, c in zip(resolution, partition.resolution)):
        raise ConfigurationError(
            f"Sample resolution {resolution} must be at least twice the node grid {partition.resolution}"
        )
    fine = VoxelPartition(partition.region, resolution)
    points = np.concatenate([fine.centers(), model.space.nodes])
    residual = np.asarray(f, dtype=float) - model.simulate(mu)
    values = np.linalg.norm(model.adjoint_field_at(residual, points), axis=1)

    node = np.full(len(points), -1, dtype=np.int64)
    node[fine.num_cells:] = np.arange(model.num_nodes)
    return LevelSetSample(
        points=points,
        values=values,
        cells=partition.locate(points),
        node=node,
        resolution=resolution,
        spacing=fine.mesh_size,
    )


def level_set_extract(sample: LevelSetSample, alpha: float, band: float) -> np.ndarray:
    """
    Sample points in the band |g(x) - alpha| <= band around the level set L_alpha.

    Returns:
        np.ndarray: (n, 3) member points, possibly empty.
    """
    if not band > 0:
        raise ConfigurationError(f"Level-set band must be positive, got {band}")
    members = sample.points[sample.members(alpha, band)]
    if len(members) == 0:
        LOGGER.warning("Empty level set", extra={"alpha": alpha, "band": band})
    return members


def atom_elimination_check(
    report: CertificateReport, sample: LevelSetSample, lam: float, eps: float, whole_cell: bool = False
) -> np.ndarray:
    """
    Nodes that cannot carry mass: |c_k| < lambda/2 - eps.

    With `whole_cell`, a node also needs g < lambda/2 - eps on every fine sample of its
    cell, so that its whole voxel stays out of the level set.

    Args:
        report (CertificateReport): Certificate of the candidate.
        sample (LevelSetSample): Dual field of the same candidate.
        lam (float): Regularization weight.
        eps (float): Margin, > 0.
        whole_cell (bool): Also require the cell's fine samples below the threshold.

    Returns:
        np.ndarray: Sorted indices of provably inactive nodes.
    """
    if not eps > 0:
        raise ConfigurationError(f"Elimination margin must be positive, got {eps}")
    threshold = 0.5 * lam - eps
    below = report.dual_norms < threshold

    if whole_cell:
        cell_max = np.full(len(report.nodes), -np.inf)
        voxel_samples = sample.node < 0
        np.maximum.at(cell_max, sample.cells[voxel_samples], sample.values[voxel_samples])
        below &= cell_max < threshold

    eliminated = np.flatnonzero(below)
    violations = np.intersect1d(eliminated, report.active)
    if len(violations):
        LOGGER.error(
            "Active nodes fall in the eliminated set",
            extra={"nodes": [int(k) for k in violations]},
        )
    return eliminated
