"""CSV formats for matrices, vectors, and rules.

Matrices are stored row-major with a first line "rows,cols" followed by
one comma-separated line per row; values use %.17g so float64 round-trips
exactly. Rules are stored one node per line with an "index,x0,...,weight"
header. These formats decouple dataset generation from solving.
"""
from __future__ import annotations

import json
import os
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .dataset import FullRule
from .focuss import SparseRule

__all__ = [
    "write_matrix",
    "read_matrix",
    "write_vector",
    "read_vector",
    "write_rule",
    "read_rule",
    "write_full_rule",
    "write_json",
    "read_json",
    "save_compressed",
]


def _format_row(row) -> str:
    return ",".join(f"{v:.17g}" for v in row)


def write_matrix(path: str | os.PathLike, matrix: NDArray[np.float64]) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="ascii") as handle:
        handle.write(f"{matrix.shape[0]},{matrix.shape[1]}\n")
        for row in matrix:
            handle.write(_format_row(row) + "\n")


def read_matrix(path: str | os.PathLike) -> NDArray[np.float64]:
    with open(path, "r", encoding="ascii") as handle:
        header = handle.readline().strip()
        try:
            rows, cols = (int(part) for part in header.split(","))
        except ValueError as exc:
            raise ValueError(f"{path}: bad header {header!r}, expected 'rows,cols'") from exc
        data = np.loadtxt(handle, delimiter=",", ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(f"{path}: header says {(rows, cols)}, data is {data.shape}")
    return data


def write_vector(path: str | os.PathLike, vector: NDArray[np.float64]) -> None:
    write_matrix(path, np.asarray(vector, dtype=float).reshape(-1, 1))


def read_vector(path: str | os.PathLike) -> NDArray[np.float64]:
    data = read_matrix(path)
    if data.shape[1] != 1:
        raise ValueError(f"{path}: expected a single column, got {data.shape[1]}")
    return data[:, 0]


def _write_rule_lines(
    path: str | os.PathLike,
    indices: NDArray[np.int64],
    coords: NDArray[np.float64],
    weights: NDArray[np.float64],
) -> None:
    dim = coords.shape[1]
    header = "index," + ",".join(f"x{d}" for d in range(dim)) + ",weight"
    with open(path, "w", encoding="ascii") as handle:
        handle.write(header + "\n")
        for i, idx in enumerate(indices):
            handle.write(f"{int(idx)}," + _format_row(coords[i]) + f",{weights[i]:.17g}\n")


def write_rule(path: str | os.PathLike, rule: SparseRule) -> None:
    nodes = rule.nodes
    coords = nodes.reshape(-1, 1) if nodes.ndim == 1 else nodes
    _write_rule_lines(path, rule.indices, coords, rule.weights)


def write_full_rule(path: str | os.PathLike, rule: FullRule) -> None:
    indices = np.arange(rule.size, dtype=np.int64)
    _write_rule_lines(path, indices, rule.coords, rule.weights)


def read_rule(
    path: str | os.PathLike,
) -> tuple[NDArray[np.int64], NDArray[np.float64], NDArray[np.float64]]:
    """Read a rule CSV; returns (indices, nodes, weights)."""
    with open(path, "r", encoding="ascii") as handle:
        header = handle.readline().strip().split(",")
        if header[0] != "index" or header[-1] != "weight":
            raise ValueError(f"{path}: unexpected rule header {header}")
        data = np.loadtxt(handle, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"{path}: empty rule file")
    indices = data[:, 0].astype(np.int64)
    nodes = data[:, 1:-1]
    if nodes.shape[1] == 1:
        nodes = nodes[:, 0]
    return indices, nodes, data[:, -1]


def write_json(path: str | os.PathLike, payload: dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path: str | os.PathLike) -> dict[str, Any]:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def save_compressed(directory: str | os.PathLike, compressed) -> None:
    """Dump a compressed system (matrix, rhs, kept singulars) for audits."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, "compressed_matrix.csv"), compressed.matrix)
    write_vector(os.path.join(directory, "compressed_rhs.csv"), compressed.rhs)
    write_vector(os.path.join(directory, "kept_singulars.csv"), compressed.kept_singulars)
