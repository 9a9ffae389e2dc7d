from typing import Optional

import numpy as np

from components.errors import DomainError, SchemaError
from components.measures.geometry import Box
from components.measures.measure import DiscreteVectorMeasure
from components.tables import duplicate_row, format_value, read_table, write_table

MEASURE_COLUMNS = ("x", "y", "z", "mx", "my", "mz")


def write_measure_csv(mu: DiscreteVectorMeasure, path, scale: Optional[float] = None) -> None:
    comments = ["units: x,y,z in m; mx,my,mz in A*m^2"]
    if scale is not None:
        comments.append(f"scale (mu0/4pi): {format_value(scale)}")
    write_table(path, MEASURE_COLUMNS, np.hstack([mu.locations, mu.moments]), comments)


def read_measure_csv(path, region: Optional[Box] = None) -> DiscreteVectorMeasure:
    """
    Read a measure from `x,y,z,mx,my,mz` CSV.

    Raises:
        SchemaError: On malformed rows, non-finite values or duplicate locations.
    """
    table, lines = read_table(path, MEASURE_COLUMNS, with_lines=True)
    duplicate = duplicate_row(table[:, :3])
    if duplicate is not None:
        raise SchemaError("Duplicate atom location", path, lines[duplicate])
    try:
        return DiscreteVectorMeasure(table[:, :3], table[:, 3:], region)
    except DomainError as e:
        raise SchemaError(str(e), path)
