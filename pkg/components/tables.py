import csv
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np

from components.errors import SchemaError


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence], comments: Optional[List[str]] = None) -> None:
    """
    Write a UTF-8 CSV table: `# ` comment lines, one header line, then the rows.
    Floats are written with repr so that reading them back is lossless.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for comment in comments or []:
            handle.write(f"# {comment}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def read_table(path, columns: Sequence[str], with_lines: bool = False):
    """
    Read a numeric CSV table written by write_table.

    Args:
        path: File to read.
        columns: Expected header, in order.
        with_lines: Also return the file line number of every row.

    Returns:
        np.ndarray: (n, len(columns)) float array, plus the line numbers when requested.

    Raises:
        SchemaError: On a wrong header, a malformed row or a non-finite value,
            naming the offending line.
    """
    rows, lines = [], []
    header_seen = False
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for number, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = next(csv.reader([stripped]))
            if not header_seen:
                if [f.strip() for f in fields] != list(columns):
                    raise SchemaError(f"Expected header {','.join(columns)}, got {stripped}", path, number)
                header_seen = True
                continue
            if len(fields) != len(columns):
                raise SchemaError(f"Expected {len(columns)} fields, got {len(fields)}", path, number)
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise SchemaError(f"Non-numeric value in row: {stripped}", path, number)
            if not all(math.isfinite(v) for v in values):
                raise SchemaError("NaN or infinite value", path, number)
            rows.append(values)
            lines.append(number)
    if not header_seen:
        raise SchemaError(f"Missing header {','.join(columns)}", path)
    table = np.array(rows, dtype=float).reshape(-1, len(columns))
    if with_lines:
        return table, lines
    return table


def duplicate_row(points: np.ndarray) -> Optional[int]:
    """Index of the first row repeating an earlier one, or None."""
    seen = {}
    for i, point in enumerate(points):
        key = tuple(point)
        if key in seen:
            return i
        seen[key] = i
    return None
