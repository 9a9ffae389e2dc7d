import json
import re
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

import constants
from components.errors import ConfigurationError, SchemaError
from components.refinement import RefinementPlan
from components.solver import SolveOptions

Vector = Tuple[float, float, float]


class DipoleSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    location: Vector
    moment: Vector


class RandomDipoleSpec(BaseModel):
    """Sparse random truth: `count` dipoles uniform in S, magnitudes uniform in [min_moment, max_moment]."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    count: int = Field(ge=0)
    min_moment: float = Field(default=0.5, gt=0)
    max_moment: float = Field(default=1.5, gt=0)

    @model_validator(mode="after")
    def _check_range(self):
        if self.max_moment < self.min_moment:
            raise ValueError("max_moment must not be below min_moment")
        return self


class SensorGridSpec(BaseModel):
    """
    Planar sensor grid, sized by `shape` or by `spacing`.

    Attributes:
        extent: (x0, x1, y0, y1) of the grid in meters.
        shape: Sensors per axis.
        spacing: Distance between neighbouring sensors in meters. Each axis gets
            round(length / spacing) + 1 sensors, spread evenly over the extent.
        height: Clearance of the sensor plane above the top of S, > 0.
        direction: Sensing direction v, normalized on use.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    extent: Tuple[float, float, float, float]
    shape: Optional[Tuple[int, int]] = None
    spacing: Optional[float] = Field(default=None, gt=0)
    height: float = Field(gt=0)
    direction: Vector = (0.0, 0.0, 1.0)

    @field_validator("shape")
    @classmethod
    def _check_shape(cls, value):
        if value is not None and min(value) < 1:
            raise ValueError("shape entries must be positive")
        return value

    @field_validator("direction")
    @classmethod
    def _check_direction(cls, value):
        if sum(t * t for t in value) == 0.0:
            raise ValueError("direction must be nonzero")
        return value

    @model_validator(mode="after")
    def _check_size(self):
        if (self.shape is None) == (self.spacing is None):
            raise ValueError("Give exactly one of shape and spacing")
        x0, x1, y0, y1 = self.extent
        if x1 < x0 or y1 < y0:
            raise ValueError("extent must be ordered as (x0, x1, y0, y1)")
        return self

    @property
    def resolved_shape(self) -> Tuple[int, int]:
        if self.shape is not None:
            return self.shape
        x0, x1, y0, y1 = self.extent
        return int(round((x1 - x0) / self.spacing)) + 1, int(round((y1 - y0) / self.spacing)) + 1


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    std: float = Field(default=0.0, ge=0)


class ScenarioConfig(BaseModel):
    """
    Synthetic scenario: a source box, a ground-truth magnetization, a sensor grid and noise.
    Every random draw derives from `seed`, which is required whenever randomness is requested.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    region_lo: Vector
    region_hi: Vector
    dipoles: List[DipoleSpec] = Field(default_factory=list)
    random_dipoles: Optional[RandomDipoleSpec] = None
    sensors: SensorGridSpec
    noise: NoiseSpec = NoiseSpec()
    seed: Optional[int] = None
    scale: float = Field(default=constants.SCALE, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if any(h <= l for l, h in zip(self.region_lo, self.region_hi)):
            raise ValueError("region_hi must exceed region_lo on every axis")
        randomized = self.noise.std > 0 or (self.random_dipoles is not None and self.random_dipoles.count > 0)
        if randomized and self.seed is None:
            raise ValueError("seed is required when noise or random dipoles are configured")
        return self


class DataFiles(BaseModel):
    """Measured inputs: sensor and field CSV files plus the source box they refer to."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sensors: str
    field: str
    region_lo: Vector
    region_hi: Vector
    scale: float = Field(default=constants.SCALE, gt=0)


class RunConfig(BaseModel):
    """
    Versioned run configuration.

    Attributes:
        config_version: Format version, currently 1.
        scenario: Synthetic scenario to invert, or
        data: measured input files.
        lam: Absolute regularization weights; take precedence over lambda_ratios.
        lambda_ratios: lambda as fractions of lambda_max on the finest level.
        refinement: Grid sequence and refinement options.
        solve: Solver options.
        output_dir: Directory receiving every artifact.
        max_workers: Lambda values solved concurrently.
        cache_dir: Forward-model cache, the process default when None.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    config_version: Literal[1] = constants.CONFIG_VERSION
    scenario: Optional[ScenarioConfig] = None
    data: Optional[DataFiles] = None
    lam: List[float] = Field(default_factory=list)
    lambda_ratios: List[float] = Field(default_factory=lambda: [0.1])
    refinement: RefinementPlan = RefinementPlan()
    solve: SolveOptions = SolveOptions()
    output_dir: str = "magtv-out"
    max_workers: int = Field(default=1, ge=1)
    cache_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if (self.scenario is None) == (self.data is None):
            raise ValueError("Exactly one of scenario and data is required")
        if any(not value > 0 for value in self.lam + self.lambda_ratios):
            raise ValueError("lambda values must be positive")
        if not self.lam and not self.lambda_ratios:
            raise ValueError("Give lam or lambda_ratios")
        return self

    @property
    def lambda_values(self) -> List[Tuple[Optional[float], Optional[float]]]:
        """(absolute lambda, ratio) pairs, exactly one of each pair set."""
        if self.lam:
            return [(value, None) for value in self.lam]
        return [(None, ratio) for ratio in self.lambda_ratios]


def load_config(path) -> RunConfig:
    """
    Read a JSON run configuration.

    Raises:
        SchemaError: If the file is not valid JSON.
        ConfigurationError: If the content does not validate, naming the field path and
            its line in the file.
    """
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(e.msg, path, e.lineno)
    return parse_config(raw, source=path, text=text)


def _key_line(text: str, loc) -> Optional[int]:
    """Line of the innermost key of `loc` in the JSON text, following the path from the top."""
    position, found = 0, False
    for part in loc:
        if not isinstance(part, str):
            continue
        match = re.compile(rf'"{re.escape(part)}"\s*:').search(text, position)
        if match is None:
            break
        position, found = match.start(), True
    return text.count("\n", 0, position) + 1 if found else None


def _describe(error: ValidationError, source, text: Optional[str]) -> str:
    messages = []
    for entry in error.errors():
        loc = entry["loc"]
        field = ".".join(str(part) for part in loc) or "<root>"
        location = ""
        if source is not None:
            location = f"{source}"
            line = _key_line(text, loc) if text is not None else None
            if line is not None:
                location += f":{line}"
            location += ": "
        messages.append(f"{location}{field}: {entry['msg']}")
    return "invalid configuration: " + "; ".join(messages)


def parse_config(raw: dict, source=None, text: Optional[str] = None) -> RunConfig:
    """
    Validate a raw configuration mapping.

    Args:
        raw (dict): Decoded JSON.
        source: File the mapping came from, for error messages.
        text (str): The file's text, used to report line numbers.

    Raises:
        ConfigurationError: Listing every failing field as `source:line: field.path: message`.
    """
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(_describe(e, source, text))


def with_overrides(
    cfg: RunConfig,
    seed: Optional[int] = None,
    output: Optional[str] = None,
    lambda_ratio: Optional[float] = None,
    lam: Optional[float] = None,
    levels: Optional[int] = None,
) -> RunConfig:
    """Apply command-line overrides and validate the result."""
    raw = cfg.model_dump(mode="json")
    if seed is not None and raw.get("scenario") is not None:
        raw["scenario"]["seed"] = seed
    if output is not None:
        raw["output_dir"] = output
    if lambda_ratio is not None:
        raw["lambda_ratios"] = [lambda_ratio]
        raw["lam"] = []
    if lam is not None:
        raw["lam"] = [lam]
    if levels is not None:
        raw["refinement"]["levels"] = levels
    return parse_config(raw)
