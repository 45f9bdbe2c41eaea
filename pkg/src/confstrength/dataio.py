"""Plain-text serialization: CSV matrices with a small comment header.

Floats are written with 17 significant digits so files round-trip bit-exactly
and golden files are language-neutral.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInput

__all__ = ["fmt", "write_dataset_matrix", "read_dataset_matrix", "write_csv_rows"]


def fmt(x) -> str:
    """Round-trippable scalar formatting for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return f"{float(x):.17g}"
    return str(x)


def write_dataset_matrix(path: str, array: np.ndarray, d: int, n: int) -> None:
    """Write a matrix (or vector) row-major with the `# d=<d> n=<n>` header."""
    array = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"# d={d} n={n}\n")
        for row in array:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_dataset_matrix(path: str) -> tuple[np.ndarray, dict]:
    """Read a matrix written by :func:`write_dataset_matrix`."""
    meta: dict = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        k, v = token.split("=", 1)
                        meta[k] = int(v)
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise InvalidInput(f"no data rows in {path}")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[0] == 1:
        arr = arr.ravel()
    return arr, meta


def write_csv_rows(path: str, header: list[str], rows: list[list]) -> None:
    """Schema-stable CSV: header always present, cells via :func:`fmt`."""
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    os.replace(tmp, path)
