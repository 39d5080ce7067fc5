"""Serialized records and file IO for quantum_kolmogorov."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .const import CSV_FLOAT_FORMAT
from .exceptions import InvalidParameterError


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write to a temporary file next to `path`, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def format_float(value: float) -> str:
    """17 significant digits, locale independent."""
    return format(float(value), CSV_FLOAT_FORMAT)


def dumps_json(value: Any) -> str:
    """Deterministic JSON text."""
    return json.dumps(value, indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, value: Any) -> None:
    """Atomically write a JSON document."""
    atomic_write_text(path, dumps_json(value))


def read_json(path: str | Path) -> Any:
    """Read a JSON document, reporting malformed input as a parameter error."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exception:
        raise InvalidParameterError(f"cannot read JSON from {path}: {exception}") from exception


def csv_text(header: list[str], columns: list[np.ndarray]) -> str:
    """Render equal-length numeric columns as CSV."""
    lines = [",".join(header)]
    lines.extend(",".join(format_float(value) for value in row) for row in zip(*columns))
    return "\n".join(lines) + "\n"


def write_two_column_csv(
    path: str | Path, x: np.ndarray, values: np.ndarray, header: str = "value"
) -> None:
    """Atomically write (x, value) rows."""
    atomic_write_text(path, csv_text(["x", header], [np.asarray(x), np.asarray(values)]))


def read_two_column_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read (x, value) rows; the header row is optional, x must strictly increase."""
    try:
        with Path(path).open(encoding="utf-8", newline="") as handle:
            rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
    except OSError as exception:
        raise InvalidParameterError(f"cannot read {path}: {exception}") from exception

    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            # header row
            rows = rows[1:]

    try:
        table = np.array([[float(row[0]), float(row[1])] for row in rows], dtype=float)
    except (ValueError, IndexError) as exception:
        raise InvalidParameterError(f"malformed two-column CSV {path}: {exception}") from exception

    if len(table) < 2:
        raise InvalidParameterError(f"{path} needs at least two data rows")
    if not np.all(np.diff(table[:, 0]) > 0):
        raise InvalidParameterError(f"first column of {path} must be strictly increasing")
    return table[:, 0], table[:, 1]


def _optional_float(value: Any) -> float | None:
    return None if value is None else float(value)


@dataclass
class KernelSidecar:
    """Metadata written next to a kernel or solution CSV."""

    @classmethod
    def from_dict(cls, value: dict) -> KernelSidecar:
        """Convert a sidecar dict to a KernelSidecar."""
        return cls(
            sigma=float(value["sigma"]),
            tau=float(value["tau"]),
            H=dict(value["H"]),
            n=int(value["n"]),
            L=float(value["L"]),
        )

    sigma: float
    tau: float
    H: dict
    n: int
    L: float

    def to_dict(self) -> dict[str, Any]:
        """Convert to the sidecar dict."""
        return asdict(self)


@dataclass
class MomentReportRow:
    """One order of the series / partition / quadrature reconciliation."""

    @classmethod
    def from_dict(cls, value: dict) -> MomentReportRow:
        """Convert a report entry to a MomentReportRow."""
        return cls(
            n=int(value["n"]),
            series=str(value["series"]),
            partition=str(value["partition"]),
            quadrature=_optional_float(value.get("quadrature")),
            rel_gap=_optional_float(value.get("rel_gap")),
            agree=bool(value.get("agree", True)),
        )

    n: int
    series: str
    partition: str
    quadrature: float | None
    rel_gap: float | None
    agree: bool = True

    def to_dict(self) -> dict[str, Any]:
        """Convert to the report entry dict."""
        return asdict(self)


@dataclass
class ViolationReport:
    """Sup-norm gauge translation violation at one ε."""

    @classmethod
    def from_dict(cls, value: dict) -> ViolationReport:
        """Convert a report dict to a ViolationReport."""
        return cls(
            eps=float(value["eps"]),
            sup_violation=float(value["sup_violation"]),
            grid=dict(value["grid"]),
        )

    eps: float
    sup_violation: float
    grid: dict

    def to_dict(self) -> dict[str, Any]:
        """Convert to the report dict."""
        return asdict(self)


def write_matrix_csv(path: str | Path, matrix: np.ndarray) -> None:
    """Atomically write a real matrix, one row per line, no header."""
    lines = [",".join(format_float(value) for value in row) for row in np.asarray(matrix)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a real matrix written by write_matrix_csv."""
    try:
        with Path(path).open(encoding="utf-8", newline="") as handle:
            rows = [[float(cell) for cell in row] for row in csv.reader(handle) if row]
    except (OSError, ValueError) as exception:
        raise InvalidParameterError(f"cannot read matrix from {path}: {exception}") from exception
    if not rows or any(len(row) != len(rows[0]) for row in rows):
        raise InvalidParameterError(f"{path} is not a rectangular matrix")
    return np.array(rows, dtype=float)
