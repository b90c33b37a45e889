"""Dense 2-D float64 helpers and seeded randomness.

A "matrix" here is simply a C-contiguous ``numpy.ndarray`` of dtype float64
with ``ndim == 2``; rows are examples. The helpers below exist so that shape
errors are raised with both shapes named, instead of surfacing as numpy
broadcasting surprises deep inside a backward pass.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class EmptyBatchError(ValueError):
    """A statistic was requested over zero rows."""


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a contiguous float64 matrix (1-D input becomes one row)."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def add_row_broadcast(a: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if bias.ndim != 2 or bias.shape[0] != 1 or bias.shape[1] != a.shape[1]:
        raise ShapeError(f"add_row_broadcast: bias {bias.shape} does not fit {a.shape}")
    return a + bias


def map_elementwise(a: np.ndarray, f: Callable[[float], float]) -> np.ndarray:
    """Apply a scalar function to every entry.

    This is the slow, obviously-correct path; layers use the vectorised
    activation kernels instead and tests compare the two.
    """
    out = np.empty_like(a, dtype=np.float64)
    flat_in = a.reshape(-1)
    flat_out = out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = f(float(v))
    return out


def column_mean_var(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and biased (divide-by-m) variance, each shaped ``(1, n)``."""
    if a.shape[0] == 0:
        raise EmptyBatchError("column_mean_var: matrix has no rows")
    mean = a.mean(axis=0, keepdims=True)
    var = ((a - mean) ** 2).mean(axis=0, keepdims=True)
    return mean, var


def argmax_rows(a: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximal index, which is the tie-break we want.
    if a.shape[1] == 0:
        raise ShapeError("argmax_rows: matrix has no columns")
    return np.argmax(a, axis=1)


class Rng:
    """Seeded generator (PCG64) shared by weight init and shuffling.

    Equal seeds give bitwise-equal streams for a fixed numpy version.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, rows: int, cols: int, stddev: float = 1.0) -> np.ndarray:
        if stddev < 0:
            raise ValueError(f"stddev must be >= 0, got {stddev}")
        if stddev == 0:
            return np.zeros((rows, cols))
        return self._gen.standard_normal((rows, cols)) * stddev

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)


def rng_normal(rng: Rng, rows: int, cols: int, stddev: float) -> np.ndarray:
    return rng.normal(rows, cols, stddev)
