import os
import pathlib
from typing import Optional

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.errors import SchemaError
from components.forward.model import ForwardModel, assemble, model_key
from components.forward.sensors import SensorGrid
from components.measures import DipoleGsmSpace

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)


def save_model(model: ForwardModel, path) -> None:
    """Write an assembled matrix to an uncompressed .npz file (bit-exact)."""
    np.savez(
        path,
        key=np.array(model.content_hash()),
        scale=np.array(model.scale),
        matrix=np.asarray(model.matrix),
    )


def load_model(path, space: DipoleGsmSpace, sensors: SensorGrid, scale: float) -> ForwardModel:
    """
    Read a cached matrix back, checking that it belongs to (space, sensors, scale).

    Raises:
        SchemaError: If the file does not match the requested model.
    """
    with np.load(path, allow_pickle=False) as data:
        key = str(data["key"])
        matrix = np.array(data["matrix"])
    if key != model_key(space, sensors, scale):
        raise SchemaError("Cached forward model does not match the requested space and sensors", path=path)
    if matrix.shape != (len(sensors), 3 * space.num_nodes):
        raise SchemaError(f"Cached matrix has shape {matrix.shape}", path=path)
    matrix.flags.writeable = False
    return ForwardModel(sensors=sensors, space=space, scale=float(scale), matrix=matrix)


def cached_assemble(
    space: DipoleGsmSpace,
    sensors: SensorGrid,
    scale: float = constants.SCALE,
    cache_dir: Optional[str] = None,
    gap: Optional[float] = None,
) -> ForwardModel:
    """
    Assemble a forward model, reusing a cached matrix keyed by content hash.
    An empty cache directory disables caching.
    """
    cache_dir = constants.CACHE_DIR if cache_dir is None else cache_dir
    if not cache_dir:
        return assemble(space, sensors, scale, gap=gap)

    sensors.check_separation(space.region, space.mesh_size if gap is None else gap)
    path = pathlib.Path(cache_dir).joinpath(f"{model_key(space, sensors, scale)}.npz")
    if path.exists():
        LOGGER.info(f"Loading cached forward model: {path.name}")
        return load_model(path, space, sensors, scale)

    model = assemble(space, sensors, scale, gap=gap)
    if model.matrix is not None:
        os.makedirs(cache_dir, exist_ok=True)
        save_model(model, path)
    return model
