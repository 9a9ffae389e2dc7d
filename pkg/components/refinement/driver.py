import dataclasses
import json
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.certificate import LevelSetSample, dual_field_sample, level_set_extract
from components.errors import ConfigurationError, DimensionError
from components.forward import ForwardModel, SensorGrid, cached_assemble
from components.measures import (
    Box,
    DipoleGsmSpace,
    TestFunctionFamily,
    VoxelPartition,
    hausdorff_distance,
    project_onto_gsm,
    r_distance_proxy,
    support_points,
    truncation_bound,
)
from components.refinement.convergence import support_convergence
from components.refinement.plan import RefinementPlan
from components.refinement.quantities import (
    d_lambda,
    delta,
    inequality_audit,
    kappa_probe_estimate,
    kappa_upper_bound,
    range_projection,
)
from components.solver import ConvergedBy, SolveOptions, SolveResult, data_perturbation_bound, lambda_max, solve
from components.tables import format_value, write_table

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

# Probe atoms for the kappa estimate sit on the centers of the base grid refined by 3,
# which never coincide with a node of a factor-2 sequence
_PROBE_FACTOR = 3


@dataclass(frozen=True, eq=False)
class InversionData:
    """Sensor data of one inversion: the region S, the sensors and the field values f."""

    region: Box
    sensors: SensorGrid
    f: np.ndarray
    scale: float = constants.SCALE

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).ravel()
        if f.size != len(self.sensors):
            raise DimensionError(f"Got {f.size} field values for {len(self.sensors)} sensors")
        f = np.array(f)
        f.flags.writeable = False
        object.__setattr__(self, "f", f)


@dataclass(frozen=True)
class LevelRow:
    level: int
    nx: int
    ny: int
    nz: int
    num_nodes: int
    mesh_size: float
    covering_radius: float
    lam: float
    objective: float
    tv: float
    active_count: int
    cert_gap: float
    cert_passed: bool
    converged_by: str
    iterations: int
    r_distance: float
    truncation_bound: float
    support_hausdorff: Optional[float]
    dist_to_levelset: float
    dist_from_ref_support: float
    kappa: float
    kappa_probe: float
    delta: float
    d_lambda: float
    fncond3_ok: bool
    fncond2_ok: bool
    fncond3_slack: float
    fncond2_lower_slack: float
    fncond2_upper_slack: float
    projection_residual: Optional[float]
    perturbation_lhs: float
    perturbation_rhs: float
    flags: str
    wall_time: float


TRACE_COLUMNS = tuple(f.name for f in dataclasses.fields(LevelRow))


def _json_value(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


@dataclass(frozen=True, eq=False)
class RefinementTrace:
    """
    Result of a refinement run: one LevelRow per level plus the level solutions.

    Attributes:
        lam: Regularization weight used on every level.
        lambda_max: lambda_max of the data on the finest level.
        rows: Per-level observables, coarse to fine.
        results: Per-level solver results.
        level_data: Data vector each level was solved with.
        samples: Per-level dual-field samples.
        reference: The finest-level solution for the unperturbed data.
        level_set: Band level-set points of the reference dual field at lambda/2.
        warnings: Non-fatal conditions met during the run.
    """

    lam: float
    lambda_max: float
    rows: List[LevelRow]
    results: List[SolveResult]
    level_data: List[np.ndarray]
    samples: List[LevelSetSample]
    reference: SolveResult
    level_set: np.ndarray
    warnings: List[str] = field(default_factory=list)

    @property
    def objectives(self) -> List[float]:
        return [row.objective for row in self.rows]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_max": self.lambda_max,
            "columns": list(TRACE_COLUMNS),
            "levels": [{k: _json_value(v) for k, v in dataclasses.asdict(row).items()} for row in self.rows],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, path) -> None:
        """Write one row per level in TRACE_COLUMNS order. Non-finite values are written as inf/nan."""
        write_table(
            path,
            TRACE_COLUMNS,
            (dataclasses.astuple(row) for row in self.rows),
            comments=[f"lambda: {format_value(self.lam)}", f"lambda_max: {format_value(self.lambda_max)}"],
        )


def nested_spaces(region: Box, plan: RefinementPlan) -> List[DipoleGsmSpace]:
    """
    Nested dipole spaces V_1 ⊂ ... ⊂ V_L.

    Each level holds its own cell centers plus every coarser node that is not already one
    of them, pinned as a singleton cell. For even factors no coarse node is a fine center,
    for odd factors the coinciding centers are shared.
    """
    spaces = []
    carried = np.zeros((0, 3))
    for level in range(plan.levels):
        resolution = plan.resolution(level)
        plain = DipoleGsmSpace.regular(region, resolution)
        if len(carried):
            carried = carried[plain.node_index(carried) < 0]
        space = DipoleGsmSpace.regular(region, resolution, pinned=carried)
        spaces.append(space)
        carried = space.nodes
    return spaces


def build_levels(plan: RefinementPlan, data: InversionData, cache_dir: Optional[str] = None) -> List[ForwardModel]:
    """Assemble the forward model of every level of the plan."""
    models = []
    for space in nested_spaces(data.region, plan):
        model = cached_assemble(space, data.sensors, data.scale, cache_dir=cache_dir)
        LOGGER.debug(
            "Assembled refinement level",
            extra={"resolution": space.partition.resolution, "nodes": space.num_nodes},
        )
        models.append(model)
    return models


def _level_data(plan: RefinementPlan, model: ForwardModel, f: np.ndarray, level: int):
    f_level = f
    if plan.level_noise_std > 0:
        rng = np.random.default_rng([plan.noise_seed, level])
        f_level = f + rng.normal(0.0, plan.level_noise_std, size=f.shape)
    residual = None
    if plan.project_data:
        projected = range_projection(model, f_level)
        residual = model.norm(f_level - projected)
        f_level = projected
    return f_level, residual


def run_refinement(
    plan: RefinementPlan,
    data: InversionData,
    opts: Optional[SolveOptions] = None,
    lam: Optional[float] = None,
    models: Optional[List[ForwardModel]] = None,
    cache_dir: Optional[str] = None,
) -> RefinementTrace:
    """
    Solve the plan's levels from coarse to fine and fill the refinement trace.

    Args:
        plan (RefinementPlan): Grid sequence and run options.
        data (InversionData): Region, sensors and field data.
        opts (SolveOptions): Solver options for every level.
        lam (float): Overrides the plan's lambda when given.
        models (list): Pre-assembled level models, built from the plan otherwise.
        cache_dir (str): Forward-model cache directory.

    Returns:
        RefinementTrace: One row per level; non-convergence and audit failures are
            flagged and collected as warnings.

    Raises:
        ConfigurationError: If lambda cannot be determined.
    """
    opts = opts or SolveOptions()
    models = models if models is not None else build_levels(plan, data, cache_dir)
    if len(models) != plan.levels:
        raise ConfigurationError(f"Plan has {plan.levels} levels but {len(models)} models were given")
    f = data.f
    finest = models[-1]
    lam_max = lambda_max(finest, f)
    if lam is None:
        lam = plan.lam
    if lam is None:
        lam = plan.lambda_ratio * lam_max
        if not lam > 0:
            raise ConfigurationError("lambda_max of the data is zero; give an absolute lambda")
    lam = float(lam)

    warnings = []
    results, level_data, residuals, timings = [], [], [], []
    previous = None
    for level, model in enumerate(models):
        started = time.perf_counter()
        f_level, residual = _level_data(plan, model, f, level)
        initial = None
        if plan.warm_start and previous is not None:
            initial = model.space.moments_of(project_onto_gsm(previous.measure, model.space))
        result = solve(model, f_level, lam, opts, initial=initial)
        for message in result.warnings:
            warnings.append(f"level {level + 1}: {message}")
        LOGGER.info(
            "Solved refinement level",
            extra={
                "level": level + 1,
                "nodes": model.num_nodes,
                "objective": result.objective,
                "active_nodes": result.certificate.active_count,
                "converged_by": result.converged_by.value,
            },
        )
        results.append(result)
        level_data.append(f_level)
        residuals.append(residual)
        timings.append(time.perf_counter() - started)
        previous = result

    if plan.level_noise_std > 0 or plan.project_data:
        reference = solve(finest, f, lam, opts, initial=results[-1].moments)
        for message in reference.warnings:
            warnings.append(f"reference: {message}")
    else:
        reference = results[-1]

    samples = []
    for model, f_level, result in zip(models, level_data, results):
        resolution = tuple(plan.dual_factor * n for n in model.space.partition.resolution)
        samples.append(dual_field_sample(model, f_level, result.measure, resolution))
    if reference is results[-1]:
        reference_sample = samples[-1]
    else:
        resolution = tuple(plan.dual_factor * n for n in finest.space.partition.resolution)
        reference_sample = dual_field_sample(finest, f, reference.measure, resolution)
    level_set = level_set_extract(reference_sample, 0.5 * lam, plan.band * 0.5 * lam)

    supports = [support_points(result.measure) for result in results]
    distances = support_convergence(supports, support_points(reference.measure), level_set)
    family = TestFunctionFamily(data.region, plan.test_functions)
    probes = VoxelPartition(data.region, tuple(_PROBE_FACTOR * n for n in plan.base_resolution)).centers()
    norm_f = finest.norm(f)

    rows = []
    for level, model in enumerate(models):
        space, result, f_level = model.space, results[level], level_data[level]
        flags = []
        if result.converged_by == ConvergedBy.MAX_ITERS:
            flags.append("max_iters")
        if not result.certificate.passed:
            flags.append("certificate_failed")

        audit = inequality_audit(model, finest, f, f_level, lam, result.measure, reference.measure, plan.audit_tol)
        if not (audit.fncond3_ok and audit.fncond2_ok):
            flags.append("audit_failed")
            warnings.append(f"level {level + 1}: inequality audit failed ({audit.slacks})")
            LOGGER.error("Inequality audit failed", extra={"level": level + 1, "slacks": audit.slacks})

        kappa = kappa_upper_bound(reference.measure, space, model)
        hausdorff = None
        if level > 0:
            hausdorff = hausdorff_distance(supports[level - 1], supports[level])
        if distances[level].flagged or (hausdorff is not None and not np.isfinite(hausdorff)):
            flags.append("empty_support")
        lhs, rhs = data_perturbation_bound(model, f, f_level, lam, result.moments)

        rows.append(
            LevelRow(
                level=level + 1,
                nx=space.partition.resolution[0],
                ny=space.partition.resolution[1],
                nz=space.partition.resolution[2],
                num_nodes=space.num_nodes,
                mesh_size=space.mesh_size,
                covering_radius=space.covering_radius(),
                lam=lam,
                objective=result.objective,
                tv=result.certificate.tv,
                active_count=result.certificate.active_count,
                cert_gap=result.certificate.gap,
                cert_passed=result.certificate.passed,
                converged_by=result.converged_by.value,
                iterations=result.iterations,
                r_distance=r_distance_proxy(result.measure, reference.measure, family),
                truncation_bound=truncation_bound(result.measure, reference.measure, family),
                support_hausdorff=hausdorff,
                dist_to_levelset=distances[level].dist_to_levelset,
                dist_from_ref_support=distances[level].dist_from_ref_support,
                kappa=kappa,
                kappa_probe=kappa_probe_estimate(model, probes),
                delta=delta(f_level - f, space, model),
                d_lambda=d_lambda(kappa, norm_f, model.norm(f_level), lam),
                fncond3_ok=audit.fncond3_ok,
                fncond2_ok=audit.fncond2_ok,
                fncond3_slack=audit.slacks["fncond3"],
                fncond2_lower_slack=audit.slacks["fncond2_lower"],
                fncond2_upper_slack=audit.slacks["fncond2_upper"],
                projection_residual=residuals[level],
                perturbation_lhs=lhs,
                perturbation_rhs=rhs,
                flags=";".join(flags),
                wall_time=timings[level],
            )
        )

    return RefinementTrace(
        lam=lam,
        lambda_max=lam_max,
        rows=rows,
        results=results,
        level_data=level_data,
        samples=samples,
        reference=reference,
        level_set=level_set,
        warnings=warnings,
    )
