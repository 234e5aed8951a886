"""Half-vectorization helpers and the duplication matrix.

``vech`` stacks the lower triangle of a symmetric matrix column by column,
the convention under which the duplication matrix satisfies
``dup @ vech(A) == vec(A)`` with column-major ``vec``.
"""

from __future__ import annotations

import math

import numpy as np


def vech(a: np.ndarray) -> np.ndarray:
    """Column-major stack of the lower triangle (diagonal included)."""
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    return np.concatenate([a[j:, j] for j in range(d)])


def unvech(v: np.ndarray) -> np.ndarray:
    """Rebuild the symmetric matrix whose ``vech`` is ``v``."""
    v = np.asarray(v, dtype=float)
    d = int(round((math.sqrt(1 + 8 * v.size) - 1) / 2))
    if d * (d + 1) // 2 != v.size:
        raise ValueError(f"length {v.size} is not a triangular number")
    out = np.zeros((d, d))
    pos = 0
    for j in range(d):
        n = d - j
        out[j:, j] = v[pos:pos + n]
        out[j, j:] = v[pos:pos + n]
        pos += n
    return out


def duplication_matrix(d: int) -> np.ndarray:
    """The (d^2, d(d+1)/2) zero/one matrix mapping vech to column-major vec."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    cols = d * (d + 1) // 2
    dup = np.zeros((d * d, cols))
    pos = 0
    for j in range(d):
        for i in range(j, d):
            dup[j * d + i, pos] = 1.0
            dup[i * d + j, pos] = 1.0
            pos += 1
    return dup


def duplication_pinv(d: int) -> np.ndarray:
    """Moore-Penrose inverse of the duplication matrix."""
    dup = duplication_matrix(d)
    return np.linalg.solve(dup.T @ dup, dup.T)
