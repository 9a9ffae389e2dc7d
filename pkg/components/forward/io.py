import numpy as np

from components.errors import ConfigurationError, SchemaError
from components.forward.sensors import SensorGrid
from components.tables import duplicate_row, format_value, read_table, write_table

SENSOR_COLUMNS = ("x", "y", "z", "weight")
FIELD_COLUMNS = ("x", "y", "z", "value")


def write_sensor_csv(sensors: SensorGrid, path) -> None:
    v = sensors.direction
    comments = [
        "units: x,y,z in m; weight dimensionless",
        f"direction: {format_value(v[0])},{format_value(v[1])},{format_value(v[2])}",
    ]
    write_table(path, SENSOR_COLUMNS, np.column_stack([sensors.points, sensors.weights]), comments)


def _read_direction(path):
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.startswith("# direction:"):
                return np.array([float(t) for t in line.split(":", 1)[1].split(",")])
    return None


def read_sensor_csv(path, direction=None) -> SensorGrid:
    """
    Read sensors from `x,y,z,weight` CSV. The sensing direction comes from the
    argument or from the file's `# direction:` comment.
    """
    table, lines = read_table(path, SENSOR_COLUMNS, with_lines=True)
    duplicate = duplicate_row(table[:, :3])
    if duplicate is not None:
        raise SchemaError("Duplicate sensor location", path, lines[duplicate])
    if direction is None:
        direction = _read_direction(path)
    if direction is None:
        raise SchemaError("No sensing direction given and no '# direction:' comment found", path)
    try:
        return SensorGrid(table[:, :3], table[:, 3], np.asarray(direction, dtype=float))
    except ConfigurationError as e:
        raise SchemaError(str(e), path)


def write_field_csv(points, values, path, scale=None) -> None:
    comments = ["units: x,y,z in m; value in T"]
    if scale is not None:
        comments.append(f"scale (mu0/4pi): {format_value(scale)}")
    write_table(path, FIELD_COLUMNS, np.column_stack([points, values]), comments)


def read_field_csv(path, sensors: SensorGrid = None) -> np.ndarray:
    """
    Read field data from `x,y,z,value` CSV, checking the rows against the sensors.

    Returns:
        np.ndarray: The values in sensor order.
    """
    table, lines = read_table(path, FIELD_COLUMNS, with_lines=True)
    if sensors is not None:
        if len(table) != len(sensors):
            raise SchemaError(f"Expected {len(sensors)} field rows, got {len(table)}", path)
        mismatch = np.flatnonzero(np.any(table[:, :3] != sensors.points, axis=1))
        if len(mismatch):
            raise SchemaError("Field location does not match the sensor file", path, lines[mismatch[0]])
    return table[:, 3]
