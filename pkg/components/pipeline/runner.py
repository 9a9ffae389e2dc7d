import dataclasses
import hashlib
import json
import os
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.certificate import CertificateReport, certificate_check
from components.errors import ConfigurationError
from components.forward import cached_assemble, read_field_csv, read_sensor_csv
from components.measures import Box, read_measure_csv, write_measure_csv
from components.pipeline.config import RunConfig
from components.pipeline.scenario import file_sha256, simulate_scenario
from components.refinement import (
    InversionData,
    RefinementPlan,
    RefinementTrace,
    build_levels,
    nested_spaces,
    run_refinement,
)
from components.solver import lambda_max, solve
from components.tables import format_value, write_table

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

SUMMARY_FILE = "summary.json"
SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = ("lambda", "residual_sq", "tv", "objective", "active_count")
DUAL_FIELD_COLUMNS = ("x", "y", "z", "g")
SOLVER_TRACE_COLUMNS = ("iter", "objective", "cert_gap", "step", "active_nodes")

# Relative slack of the objective and regularization-path monotonicity checks
MONOTONE_TOL = 1e-8
PATH_TOL = 1e-6


@dataclass(frozen=True)
class RunSummary:
    output_dir: pathlib.Path
    summary: dict
    warnings: List[str] = field(default_factory=list)


def load_inputs(cfg: RunConfig) -> Tuple[InversionData, dict]:
    """
    Data of a run and the hashes identifying it.

    Returns:
        tuple: (InversionData, {name: sha256}).
    """
    if cfg.scenario is not None:
        _, data = simulate_scenario(cfg.scenario)
        digest = hashlib.sha256(json.dumps(cfg.scenario.model_dump(mode="json"), sort_keys=True).encode())
        return data, {"scenario": digest.hexdigest()}

    files = cfg.data
    sensors = read_sensor_csv(files.sensors)
    f = read_field_csv(files.field, sensors)
    data = InversionData(region=Box(files.region_lo, files.region_hi), sensors=sensors, f=f, scale=files.scale)
    hashes = {
        pathlib.Path(files.sensors).name: file_sha256(files.sensors),
        pathlib.Path(files.field).name: file_sha256(files.field),
    }
    return data, hashes


def _finite(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_level_outputs(trace: RefinementTrace, run_dir: pathlib.Path, scale: float, record_trace: bool) -> None:
    for row, result, sample in zip(trace.rows, trace.results, trace.samples):
        level_dir = run_dir.joinpath(f"level_{row.level:02d}")
        os.makedirs(level_dir, exist_ok=True)
        write_measure_csv(result.measure, level_dir.joinpath("solution.csv"), scale=scale)
        with open(level_dir.joinpath("certificate.json"), "w", encoding="utf-8") as handle:
            handle.write(result.certificate.to_json() + "\n")
        write_table(
            level_dir.joinpath("dual_field.csv"),
            DUAL_FIELD_COLUMNS,
            np.column_stack([sample.points, sample.values]),
            comments=[
                "units: x,y,z in m; g = |A*(f - A mu)| in T*m^2/A",
                f"scale (mu0/4pi): {format_value(scale)}",
            ],
        )
        if record_trace:
            write_table(
                level_dir.joinpath("solver_trace.csv"),
                SOLVER_TRACE_COLUMNS,
                (dataclasses.astuple(t) for t in result.trace),
            )
    trace.to_csv(run_dir.joinpath("trace.csv"))
    with open(run_dir.joinpath("trace.json"), "w", encoding="utf-8") as handle:
        handle.write(trace.to_json() + "\n")


def _run_summary(trace: RefinementTrace, ratio: Optional[float]) -> Tuple[dict, List[str]]:
    warnings = list(trace.warnings)
    levels = []
    for row in trace.rows:
        levels.append(
            {
                "level": row.level,
                "objective": row.objective,
                "tv": row.tv,
                "residual_sq": row.objective - row.lam * row.tv,
                "active_count": row.active_count,
                "cert_passed": row.cert_passed,
                "converged_by": row.converged_by,
                "r_distance": row.r_distance,
                "dist_to_levelset": _finite(row.dist_to_levelset),
                "dist_from_ref_support": _finite(row.dist_from_ref_support),
                "kappa": row.kappa,
                "fncond3_ok": row.fncond3_ok,
                "fncond2_ok": row.fncond2_ok,
                "flags": row.flags,
            }
        )
    objectives = trace.objectives
    monotone = all(
        later <= earlier + MONOTONE_TOL * (1.0 + abs(earlier)) for earlier, later in zip(objectives, objectives[1:])
    )
    if not monotone:
        warnings.append(f"lambda {format_value(trace.lam)}: level objectives are not non-increasing: {objectives}")
        LOGGER.warning("Level objectives increase", extra={"lambda": trace.lam, "objectives": objectives})
    summary = {
        "lambda": trace.lam,
        "lambda_ratio": ratio,
        "objective_monotone": monotone,
        "audits_passed": all(row.fncond3_ok and row.fncond2_ok for row in trace.rows),
        "levels": levels,
    }
    return summary, warnings


def _resolve_lambdas(cfg: RunConfig, lam_max: float) -> List[Tuple[float, Optional[float]]]:
    resolved = []
    for value, ratio in cfg.lambda_values:
        if value is None:
            if not lam_max > 0:
                raise ConfigurationError("lambda_max of the data is zero; give absolute lambda values")
            value = ratio * lam_max
        resolved.append((float(value), ratio))
    return resolved


def _single_level(plan: RefinementPlan) -> RefinementPlan:
    return plan.model_copy(update={"base_resolution": plan.resolution(plan.levels - 1), "levels": 1})


def run_inversion(cfg: RunConfig, single_level: bool = False) -> RunSummary:
    """
    Solve the configured refinement plan for every lambda and write all artifacts.

    Layout of the output directory:
        summary.json
        lambda_XX/trace.csv, lambda_XX/trace.json
        lambda_XX/level_YY/solution.csv, certificate.json, dual_field.csv[, solver_trace.csv]

    Args:
        cfg (RunConfig): The run configuration.
        single_level (bool): Solve only on the plan's finest grid, without coarser levels.

    Returns:
        RunSummary: The summary written to summary.json and the collected warnings.
    """
    data, hashes = load_inputs(cfg)
    plan = _single_level(cfg.refinement) if single_level else cfg.refinement
    models = build_levels(plan, data, cfg.cache_dir)
    lam_max = lambda_max(models[-1], data.f)
    lambdas = _resolve_lambdas(cfg, lam_max)

    def run(entry):
        lam, _ = entry
        return run_refinement(plan, data, cfg.solve, lam=lam, models=models)

    if cfg.max_workers > 1 and len(lambdas) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
            traces = list(executor.map(run, lambdas))
    else:
        traces = [run(entry) for entry in lambdas]

    output = pathlib.Path(cfg.output_dir)
    os.makedirs(output, exist_ok=True)
    runs, warnings = [], []
    for index, (trace, (_, ratio)) in enumerate(zip(traces, lambdas)):
        run_dir = output.joinpath(f"lambda_{index:02d}")
        _write_level_outputs(trace, run_dir, data.scale, cfg.solve.record_trace)
        summary, run_warnings = _run_summary(trace, ratio)
        runs.append(summary)
        warnings.extend(run_warnings)

    summary = {
        "config_version": cfg.config_version,
        "inputs": hashes,
        "lambda_max": lam_max,
        "levels": plan.levels,
        "runs": runs,
        "warnings": warnings,
    }
    _write_json(output.joinpath(SUMMARY_FILE), summary)
    LOGGER.info("Inversion finished", extra={"output_dir": str(output), "runs": len(runs), "warnings": len(warnings)})
    return RunSummary(output_dir=output, summary=summary, warnings=warnings)


def _path_warnings(rows: List[dict]) -> List[str]:
    warnings = []
    for previous, row in zip(rows, rows[1:]):
        span = f"from lambda {format_value(previous['lambda'])} to {format_value(row['lambda'])}"
        slack = PATH_TOL * (1.0 + abs(previous["objective"]))
        if row["residual_sq"] > previous["residual_sq"] + slack:
            warnings.append(f"residual_sq increases {span}")
        if row["tv"] < previous["tv"] - PATH_TOL * (1.0 + previous["tv"]):
            warnings.append(f"tv decreases {span}")
        if row["active_count"] < previous["active_count"]:
            warnings.append(f"active_count decreases {span}")
    for message in warnings:
        LOGGER.warning("Regularization path is not monotone", extra={"detail": message})
    return warnings


def lambda_sweep(cfg: RunConfig) -> RunSummary:
    """
    Regularization path on the plan's finest grid, from the largest lambda down,
    each solve warm-started from the previous one.

    Writes sweep.csv with columns lambda,residual_sq,tv,objective,active_count and
    summary.json. Monotonicity of residual_sq, tv and active_count along decreasing
    lambda is checked and reported as warnings.

    Returns:
        RunSummary: The summary written to summary.json and the collected warnings.
    """
    data, hashes = load_inputs(cfg)
    plan = _single_level(cfg.refinement)
    model = build_levels(plan, data, cfg.cache_dir)[0]
    lam_max = lambda_max(model, data.f)
    lambdas = sorted({lam for lam, _ in _resolve_lambdas(cfg, lam_max)}, reverse=True)
    if len(lambdas) < 2:
        LOGGER.info("Sweep over a single lambda", extra={"lambda": lambdas[0]})

    rows, warnings = [], []
    initial = None
    for lam in lambdas:
        result = solve(model, data.f, lam, cfg.solve, initial=initial)
        initial = result.moments
        residual = data.f - model.apply(result.moments)
        rows.append(
            {
                "lambda": lam,
                "residual_sq": model.inner(residual, residual),
                "tv": result.certificate.tv,
                "objective": result.objective,
                "active_count": result.certificate.active_count,
            }
        )
        warnings.extend(f"lambda {format_value(lam)}: {message}" for message in result.warnings)
    warnings.extend(_path_warnings(rows))

    output = pathlib.Path(cfg.output_dir)
    os.makedirs(output, exist_ok=True)
    write_table(
        output.joinpath(SWEEP_FILE),
        SWEEP_COLUMNS,
        ([row[name] for name in SWEEP_COLUMNS] for row in rows),
        comments=[f"lambda_max: {format_value(lam_max)}", f"scale (mu0/4pi): {format_value(data.scale)}"],
    )
    summary = {
        "config_version": cfg.config_version,
        "inputs": hashes,
        "lambda_max": lam_max,
        "sweep": rows,
        "warnings": warnings,
    }
    _write_json(output.joinpath(SUMMARY_FILE), summary)
    return RunSummary(output_dir=output, summary=summary, warnings=warnings)


def certify_measure(cfg: RunConfig, measure_path, tol: Optional[float] = None) -> CertificateReport:
    """
    Certificate of a measure file over the plan's finest space, for the first configured lambda.
    The finest space contains every coarser level's nodes, so any level's solution qualifies.

    Raises:
        DomainError: If an atom of the file is not a node of the finest space.
    """
    data, _ = load_inputs(cfg)
    space = nested_spaces(data.region, cfg.refinement)[-1]
    model = cached_assemble(space, data.sensors, data.scale, cache_dir=cfg.cache_dir)
    mu = read_measure_csv(measure_path, data.region)
    lam, _ = _resolve_lambdas(cfg, lambda_max(model, data.f))[0]
    report = certificate_check(model, data.f, lam, mu, cfg.solve.certificate_tol if tol is None else tol)

    output = pathlib.Path(cfg.output_dir)
    os.makedirs(output, exist_ok=True)
    with open(output.joinpath("certificate.json"), "w", encoding="utf-8") as handle:
        handle.write(report.to_json() + "\n")
    LOGGER.info(
        "Certificate evaluated",
        extra={"passed": report.passed, "gap": report.gap, "active_nodes": report.active_count, "nodes": space.num_nodes},
    )
    return report
