"""File formats: matrix CSV ingestion, group JSON, deterministic JSON output.

CSV dialect: comma separator, ``.`` decimal, one observation per row, optional
header auto-detected (a first row with any non-numeric cell).  All
floating-point output is serialized with 17 significant digits so that equal
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DataError

__all__ = [
    "read_matrix_csv",
    "read_groups_json",
    "write_matrix_csv",
    "format_float",
    "to_jsonable",
    "dumps_json",
    "dump_json",
]


def read_matrix_csv(path) -> np.ndarray:
    """Parse a numeric matrix from ``path``; parse errors carry line numbers."""
    path = Path(path)
    rows: list[list[float]] = []
    width: int | None = None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            cells = [c.strip() for c in row]
            if not any(cells):
                continue
            values = []
            bad = None
            for c in cells:
                try:
                    values.append(float(c))
                except ValueError:
                    bad = c
                    break
            if bad is not None:
                if lineno == 1 and not rows:
                    continue  # header row
                raise DataError(f"{path}: line {lineno}: cannot parse {bad!r} as a number")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(
                    f"{path}: line {lineno}: expected {width} columns, found {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no numeric rows found")
    return np.asarray(rows, dtype=float)


def read_groups_json(path) -> tuple[int, ...]:
    """Group sizes from a JSON array of positive integers."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, list) or not payload:
        raise DataError(f"{path}: expected a non-empty JSON array of group sizes")
    sizes = []
    for k, item in enumerate(payload):
        if not isinstance(item, int) or isinstance(item, bool) or item < 1:
            raise DataError(f"{path}: entry {k} is not a positive integer: {item!r}")
        sizes.append(item)
    return tuple(sizes)


def format_float(x: float) -> str:
    """17-significant-digit decimal form; round-trips float64 exactly."""
    return format(float(x), ".17g")


def write_matrix_csv(path, mat: np.ndarray, header: list[str] | None = None) -> None:
    path = Path(path)
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(header)
        for row in mat:
            writer.writerow([format_float(v) for v in row])


def to_jsonable(value: Any) -> Any:
    """Recursively convert arrays/scalars into JSON-serializable structures."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def _emit(value: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, key in enumerate(sorted(value)):
            out.append(f"{inner}{json.dumps(str(key))}: ")
            _emit(value[key], indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, list):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(inner)
            _emit(item, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(value, bool) or value is None:
        out.append(json.dumps(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise TypeError(f"cannot serialize {type(value).__name__} to JSON")


def dumps_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    out: list[str] = []
    _emit(to_jsonable(obj), 0, out)
    return "".join(out) + "\n"


def dump_json(obj: Any, path) -> None:
    Path(path).write_text(dumps_json(obj))
