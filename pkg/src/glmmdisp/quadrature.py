"""Gaussian quadrature rules computed from Jacobi matrices and cached.

Nodes and weights come from the Golub-Welsch eigen-decomposition of the
symmetric tridiagonal recurrence matrix of the orthogonal-polynomial family,
so any order is available without shipped tables.  Hermite rules are
symmetrized so odd orders carry an exactly-zero central node; log-weights are
derived from the eigenvectors directly to stay finite at high orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal


@dataclass(frozen=True)
class QuadratureSpec:
    """Configuration of the random-effect integral evaluation."""

    nodes_per_dim: int = 21
    adaptive: bool = True

    def __post_init__(self):
        n = self.nodes_per_dim
        if n < 3 or n % 2 == 0:
            raise ValueError(
                f"nodes_per_dim must be an odd integer >= 3, got {n}")


@lru_cache(maxsize=None)
def _hermite_rule(order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and log-weights for the weight function exp(-x^2)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        nodes = np.zeros(1)
        weights = np.array([math.sqrt(math.pi)])
        return nodes, weights, np.log(weights)
    sub = np.sqrt(np.arange(1, order) / 2.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(order), sub)
    # extreme first components underflow to 0 at high orders; their
    # log-weight is genuinely -inf (the node carries no weight)
    with np.errstate(divide="ignore"):
        log_w = 0.5 * math.log(math.pi) + 2.0 * np.log(np.abs(vecs[0]))
    # enforce exact symmetry of the rule
    nodes = 0.5 * (nodes - nodes[::-1])
    log_w = np.logaddexp(log_w, log_w[::-1]) - math.log(2.0)
    weights = np.exp(log_w)
    for a in (nodes, weights, log_w):
        a.flags.writeable = False
    return nodes, weights, log_w


def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule integrating f(x) exp(-x^2) exactly for polynomial deg < 2*order."""
    nodes, weights, _ = _hermite_rule(order)
    return nodes, weights


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule integrating f(x) over [-1, 1] exactly for deg < 2*order."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        return np.zeros(1), np.array([2.0])
    k = np.arange(1, order)
    sub = k / np.sqrt(4.0 * k * k - 1.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(order), sub)
    weights = 2.0 * vecs[0] ** 2
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=None)
def hermite_grid(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Hermite rule: node matrix (order**dim, dim) and
    combined log-weights already including the exp(+|z|^2) adaptive
    correction."""
    nodes, _, lw_raw = _hermite_rule(order)
    lw = lw_raw + nodes ** 2
    if dim == 1:
        z = nodes[:, None]
        logw = lw.copy()
    else:
        mesh = np.meshgrid(*([nodes] * dim), indexing="ij")
        z = np.column_stack([g.ravel() for g in mesh])
        wmesh = np.meshgrid(*([lw] * dim), indexing="ij")
        logw = np.sum([g.ravel() for g in wmesh], axis=0)
    z.flags.writeable = False
    logw.flags.writeable = False
    return z, logw
