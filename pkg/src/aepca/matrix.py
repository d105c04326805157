"""Dense matrix kernels and the seeded random source.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in C (row-major)
order. File formats in :mod:`aepca.dataio` define their own byte order, so the
in-memory layout never leaks into persisted data.

Random draws come from numpy's PCG64 bit generator. For a given seed and numpy
release the stream is identical across platforms.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(a, *, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def column_mean(y: np.ndarray) -> np.ndarray:
    """Element-wise mean of the columns of ``y`` (one observation per column)."""
    if y.ndim != 2 or y.shape[0] == 0 or y.shape[1] == 0:
        raise DimensionError(f"column_mean needs a non-empty 2-D matrix, got {y.shape}")
    return y.mean(axis=1)


def center_columns(y: np.ndarray) -> np.ndarray:
    return y - column_mean(y)[:, None]


def frobenius_norm_sq(a: np.ndarray) -> float:
    return float(np.sum(np.square(a)))


class RandomSource:
    """Seeded Gaussian/permutation source backed by PCG64.

    ``spawn(k)`` derives an independent child stream from ``(seed, k)`` so
    callers (e.g. per-epoch shuffles) never depend on how many draws were
    consumed elsewhere.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, key: int) -> "RandomSource":
        child = RandomSource.__new__(RandomSource)
        child.seed = self.seed
        child._gen = np.random.Generator(np.random.PCG64([self.seed, int(key)]))
        return child

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def gaussian_fill(rng: RandomSource, rows: int, cols: int, scale: float) -> np.ndarray:
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return scale * rng.normal((rows, cols))
