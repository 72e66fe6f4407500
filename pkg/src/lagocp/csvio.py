"""Trajectory CSV schema shared by the solve, simulate, direct and verify commands.

Columns, in order: t, q[i], qdot[i], lam[i], lamdot[i], u[i] (i = 0..n-1),
H_tilde, noether, objective_running. Missing values are empty fields.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import OCPError

VECTOR_COLUMNS = ("q", "qdot", "lam", "lamdot", "u")
SCALAR_COLUMNS = ("H_tilde", "noether", "objective_running")


class SchemaError(OCPError):
    pass


def header(n: int) -> List[str]:
    cols = ["t"]
    for name in VECTOR_COLUMNS:
        cols += [f"{name}[{i}]" for i in range(n)]
    return cols + list(SCALAR_COLUMNS)


@dataclass
class TrajectoryTable:
    """Column arrays of a trajectory CSV; NaN marks a blank field."""

    t: np.ndarray
    columns: Dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return self.columns["q"].shape[1]

    @property
    def rows(self) -> int:
        return self.t.shape[0]

    def has(self, name: str) -> bool:
        return not np.any(np.isnan(self.columns[name]))


def _fmt(x: Optional[float], precision: int) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{float(x):.{precision - 1}e}"


def write_table(path, table: TrajectoryTable, precision: int = 17) -> None:
    n = table.n
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header(n))
        for k in range(table.rows):
            row = [_fmt(table.t[k], precision)]
            for name in VECTOR_COLUMNS:
                row += [_fmt(x, precision) for x in table.columns[name][k]]
            row += [_fmt(table.columns[name][k], precision) for name in SCALAR_COLUMNS]
            writer.writerow(row)


_HEADER_RE = re.compile(r"^q\[(\d+)\]$")


def read_table(path) -> TrajectoryTable:
    """Parse and schema-check a trajectory CSV."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise SchemaError("empty CSV")
    head = rows[0]
    n = sum(1 for col in head if _HEADER_RE.match(col))
    if n == 0 or head != header(n):
        raise SchemaError("CSV header does not match the trajectory schema")
    width = len(head)
    body = rows[1:]
    if not body:
        raise SchemaError("CSV has no data rows")
    data = np.empty((len(body), width))
    for r, row in enumerate(body, start=1):
        if len(row) != width:
            raise SchemaError(f"row {r} has {len(row)} fields, expected {width}")
        for c, field in enumerate(row):
            try:
                data[r - 1, c] = float(field) if field != "" else np.nan
            except ValueError:
                raise SchemaError(f"row {r}, column {head[c]}: not a number: {field!r}") from None
    t = data[:, 0]
    if np.any(np.isnan(t)):
        raise SchemaError("time column has blanks")
    columns = {}
    for j, name in enumerate(VECTOR_COLUMNS):
        columns[name] = data[:, 1 + j * n : 1 + (j + 1) * n]
    for j, name in enumerate(SCALAR_COLUMNS):
        columns[name] = data[:, 1 + len(VECTOR_COLUMNS) * n + j]
    return TrajectoryTable(t, columns)
