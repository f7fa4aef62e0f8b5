"""Matrix and vector files.

Both formats start with an ASCII line ``rows cols``.  Text files follow it
with whitespace-separated reals in row-major order; binary files (suffix
``.bin``) follow it with ``rows * cols`` little-endian float64 values.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["read_matrix", "write_matrix", "MatrixFormatError"]


class MatrixFormatError(ValueError):
    """Malformed matrix file."""


def _header(line: bytes, path) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise MatrixFormatError(f"{path}: header must be 'rows cols'")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: header must hold two integers") from exc
    if rows < 0 or cols < 0:
        raise MatrixFormatError(f"{path}: negative dimensions")
    return rows, cols


def read_matrix(path) -> np.ndarray:
    """Read a ``(rows, cols)`` array."""
    path = Path(path)
    raw = path.read_bytes()
    head, _, body = raw.partition(b"\n")
    rows, cols = _header(head, path)
    if path.suffix == ".bin":
        if len(body) != 8 * rows * cols:
            raise MatrixFormatError(f"{path}: expected {rows * cols} float64 values")
        return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)
    try:
        vals = np.array(body.split(), dtype=float)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: non-numeric entry") from exc
    if vals.size != rows * cols:
        raise MatrixFormatError(f"{path}: expected {rows * cols} values, found {vals.size}")
    return vals.reshape(rows, cols)


def write_matrix(path, M) -> None:
    """Write a vector (as one column) or matrix; ``.bin`` selects the binary format."""
    path = Path(path)
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError("only vectors and matrices can be written")
    head = f"{M.shape[0]} {M.shape[1]}\n".encode()
    if path.suffix == ".bin":
        path.write_bytes(head + M.astype("<f8").tobytes())
        return
    lines = [" ".join(repr(float(v)) for v in row) for row in M]
    path.write_text(head.decode() + "\n".join(lines) + ("\n" if lines else ""))
