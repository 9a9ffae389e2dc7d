import hashlib
import json
import os
import pathlib
from dataclasses import dataclass

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.forward import SensorGrid, field_at, planar_sensor_grid, write_field_csv, write_sensor_csv
from components.measures import Box, DiscreteVectorMeasure, write_measure_csv
from components.pipeline.config import DipoleSpec, NoiseSpec, ScenarioConfig, SensorGridSpec
from components.refinement import InversionData

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

TRUTH_FILE = "truth.csv"
SENSOR_FILE = "sensors.csv"
FIELD_FILE = "field.csv"
MANIFEST_FILE = "manifest.json"


def standard_scenario() -> ScenarioConfig:
    """
    The documented 3-dipole scenario: S = [0,1]^2 x [-0.2,0] m, a 16 x 16 sensor grid over
    [-0.25,1.25]^2 at 0.4 m above S measuring the vertical component, no noise, unit scale.
    """
    return ScenarioConfig(
        region_lo=(0.0, 0.0, -0.2),
        region_hi=(1.0, 1.0, 0.0),
        dipoles=[
            DipoleSpec(location=(0.25, 0.3, -0.1), moment=(0.0, 0.0, 1.0)),
            DipoleSpec(location=(0.7, 0.65, -0.05), moment=(0.6, 0.0, -0.8)),
            DipoleSpec(location=(0.4, 0.8, -0.15), moment=(0.0, -0.5, 0.5)),
        ],
        sensors=SensorGridSpec(extent=(-0.25, 1.25, -0.25, 1.25), shape=(16, 16), height=0.4),
        noise=NoiseSpec(std=0.0),
        seed=0,
        scale=1.0,
    )


def scenario_region(cfg: ScenarioConfig) -> Box:
    return Box(cfg.region_lo, cfg.region_hi)


def scenario_sensors(cfg: ScenarioConfig) -> SensorGrid:
    spec = cfg.sensors
    return planar_sensor_grid(spec.extent, spec.resolved_shape, cfg.region_hi[2] + spec.height, spec.direction)


def truth_measure(cfg: ScenarioConfig) -> DiscreteVectorMeasure:
    """Listed dipoles plus the seeded random ones, added up on coinciding locations."""
    region = scenario_region(cfg)
    mu = DiscreteVectorMeasure.from_atoms(((d.location, d.moment) for d in cfg.dipoles), region)

    spec = cfg.random_dipoles
    if spec is not None and spec.count > 0:
        rng = np.random.default_rng([cfg.seed, 0])
        locations = region.lower + rng.uniform(size=(spec.count, 3)) * region.lengths
        directions = rng.normal(size=(spec.count, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        magnitudes = rng.uniform(spec.min_moment, spec.max_moment, size=spec.count)
        mu = mu.merged(DiscreteVectorMeasure(locations, directions * magnitudes[:, None], region))
    return mu


def simulate_scenario(cfg: ScenarioConfig):
    """
    Forward-simulate the scenario's field data.

    Returns:
        tuple: (truth measure, InversionData with noisy field values).
    """
    truth = truth_measure(cfg)
    sensors = scenario_sensors(cfg)
    values = field_at(truth, sensors.points, sensors.direction, cfg.scale)
    if cfg.noise.std > 0:
        rng = np.random.default_rng([cfg.seed, 1])
        values = values + rng.normal(0.0, cfg.noise.std, size=values.shape)
    return truth, InversionData(region=scenario_region(cfg), sensors=sensors, f=values, scale=cfg.scale)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass(frozen=True)
class ScenarioFiles:
    truth: pathlib.Path
    sensors: pathlib.Path
    field: pathlib.Path
    manifest: pathlib.Path


def generate_scenario(cfg: ScenarioConfig, output_dir) -> ScenarioFiles:
    """
    Write the truth measure, the sensors and the simulated field of a scenario.

    Args:
        cfg (ScenarioConfig): The scenario.
        output_dir: Target directory, created when missing.

    Returns:
        ScenarioFiles: Paths of the written files; the manifest records their SHA-256
            hashes and the scenario itself.
    """
    output = pathlib.Path(output_dir)
    os.makedirs(output, exist_ok=True)
    truth, data = simulate_scenario(cfg)

    files = ScenarioFiles(
        truth=output.joinpath(TRUTH_FILE),
        sensors=output.joinpath(SENSOR_FILE),
        field=output.joinpath(FIELD_FILE),
        manifest=output.joinpath(MANIFEST_FILE),
    )
    write_measure_csv(truth, files.truth, scale=cfg.scale)
    write_sensor_csv(data.sensors, files.sensors)
    write_field_csv(data.sensors.points, data.f, files.field, scale=cfg.scale)

    manifest = {
        "config_version": constants.CONFIG_VERSION,
        "scenario": cfg.model_dump(mode="json"),
        "files": {path.name: file_sha256(path) for path in (files.truth, files.sensors, files.field)},
    }
    with open(files.manifest, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    LOGGER.info(
        "Scenario written",
        extra={"output_dir": str(output), "dipoles": len(truth), "sensors": len(data.sensors)},
    )
    return files
