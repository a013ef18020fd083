"""Dense float64 matrices, a portable seeded Gaussian RNG and matrix CSV I/O.

Matrices are plain ``numpy.ndarray`` objects of dtype float64; the helpers
here validate shape and finiteness at the boundaries.

Random streams come from the PCG64 bit generator (``numpy.random.PCG64``,
seeded through ``SeedSequence``), whose raw 64-bit output is stable across
numpy versions and platforms.  Uniforms take the top 53 bits of each word;
Gaussians use the Box-Muller transform on consecutive uniform pairs, so a
stream of N normals is always a prefix of a stream of N + k normals.
"""
from __future__ import annotations

import io
from typing import Iterable

import numpy as np

from ._kernels import matmul_lr

_TWO_NEG_53 = 2.0 ** -53


class ShapeError(ValueError):
    """Operand shapes do not fit together."""


class DivergenceError(FloatingPointError):
    """A state or loss became non-finite or exceeded the divergence cutoff."""

    def __init__(self, message: str, step: int | None = None, history=None):
        super().__init__(message)
        self.step = step
        self.history = history


class ConvergenceError(ArithmeticError):
    """An iterative solver stopped before converging."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


def float_array(x) -> np.ndarray:
    """Array in float64, or kept in extended precision if already ``longdouble``."""
    a = np.asarray(x)
    return a if a.dtype == np.longdouble else a.astype(np.float64)


def as_matrix(data, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    m = np.array(data, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {m.ndim} dimensions")
    if rows is not None and m.shape[0] != rows or cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected {rows}x{cols}, got {m.shape[0]}x{m.shape[1]}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    return m


def identity(n: int) -> np.ndarray:
    return np.eye(n)


def transpose(m: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(m).T)


def mat_product(a, b) -> np.ndarray:
    """Matrix product with per-entry left-to-right summation over k."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return matmul_lr(a, b)


class SeededRng:
    """Deterministic PCG64 stream with a Box-Muller Gaussian transform."""

    def __init__(self, seed: int | Iterable[int] = 0):
        key = [int(s) for s in seed] if isinstance(seed, (list, tuple)) else int(seed)
        self.seed = key
        self._bits = np.random.PCG64(np.random.SeedSequence(key))

    def substream(self, *keys: int) -> "SeededRng":
        """Independent stream keyed by this seed plus ``keys``."""
        base = list(self.seed) if isinstance(self.seed, list) else [self.seed]
        return SeededRng(base + [int(k) for k in keys])

    def raw(self, size: int) -> np.ndarray:
        return self._bits.random_raw(size)

    def uniform(self, size: int) -> np.ndarray:
        """Uniform doubles in [0, 1)."""
        return (self.raw(size) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53

    def integers(self, high: int, size: int) -> np.ndarray:
        """Integers in [0, high) by scaling 53-bit uniforms."""
        return np.minimum((self.uniform(size) * high).astype(np.int64), high - 1)

    def normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.reshape(-1)[:size]


def seeded_gaussian(rows: int, cols: int, mean: float, std: float, rng: SeededRng) -> np.ndarray:
    if std < 0:
        raise ValueError("std must be non-negative")
    z = rng.normal(rows * cols).reshape(rows, cols)
    return mean + std * z


def format_float(x: float) -> str:
    return format(float(x) + 0.0, ".17g")  # no negative zero


def write_matrix_csv(m, path_or_file) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    text = "".join(",".join(format_float(v) for v in row) + "\n" for row in m)
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w", newline="") as fh:
            fh.write(text)
    else:
        path_or_file.write(text)


def read_matrix_csv(path_or_file) -> np.ndarray:
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file) as fh:
            text = fh.read()
    else:
        text = path_or_file.read()
    rows = [line for line in io.StringIO(text).read().splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty matrix file")
    data = [[float(v) for v in line.split(",")] for line in rows]
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise ShapeError("ragged rows in matrix CSV")
    return as_matrix(data)
