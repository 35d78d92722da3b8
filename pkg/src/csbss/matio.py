"""Plain-text matrix files: a ``rows cols`` header, then one row per line."""

from __future__ import annotations

import os

import numpy as np


class MatrixFormatError(ValueError):
    pass


def format_matrix(a) -> str:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise MatrixFormatError("only 1-D or 2-D arrays can be written")
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(format(v, ".17g") for v in row) for row in a)
    return "\n".join(lines) + "\n"


def write_matrix(path: str | os.PathLike, a) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_matrix(a))


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError("empty matrix file")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise MatrixFormatError(f"bad header {lines[0]!r}") from exc
    if rows < 0 or cols < 0:
        raise MatrixFormatError("negative dimensions")
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"expected {rows} rows, found {len(body)}")
    out = np.empty((rows, cols))
    for i, ln in enumerate(body):
        vals = ln.split()
        if len(vals) != cols:
            raise MatrixFormatError(f"row {i}: expected {cols} values, found {len(vals)}")
        try:
            out[i] = [float(v) for v in vals]
        except ValueError as exc:
            raise MatrixFormatError(f"row {i}: {exc}") from exc
    return out


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        return parse_matrix(fh.read())
