"""Matrix CSV reading/writing and atomic file output."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .matcore import as_matrix


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_matrix_csv(text: str, header: bool | None = None) -> tuple[np.ndarray, list[str] | None]:
    """Parse comma-separated numbers.

    ``header=None`` detects a header row by the first row containing a
    non-numeric cell.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty CSV")
    names = None
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError("CSV has a header but no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"row {i} has {len(r)} fields, expected {width}")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"non-numeric CSV cell: {exc}") from None
    return as_matrix(data), names


def read_matrix_csv(path, header: bool | None = None) -> tuple[np.ndarray, list[str] | None]:
    return parse_matrix_csv(Path(path).read_text(), header)


def format_matrix_csv(m, names=None) -> str:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    lines = []
    if names is not None:
        if len(names) != a.shape[1]:
            raise ValueError("header length does not match column count")
        lines.append(",".join(names))
    for row in a:
        lines.append(",".join(format(float(x), ".17g") for x in row))
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_matrix_csv(path, m, names=None) -> Path:
    return atomic_write_text(path, format_matrix_csv(m, names))


def write_matrix_json(path, m, names=None) -> Path:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    doc = {"columns": list(names) if names is not None else None,
           "data": [[float(format(float(x), ".17g")) for x in row] for row in a]}
    return atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
