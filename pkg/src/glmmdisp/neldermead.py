"""Derivative-free simplex minimizer.

Classic Nelder-Mead with reflection 1, expansion 2, contraction 1/2 and
shrink 1/2.  The objective may return ``+inf`` to mark an infeasible point;
the simplex then retreats without any constraint handling.  The best vertex
value is non-increasing across iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    nfev: int


def _as_value(v) -> float:
    v = float(v)
    return v if np.isfinite(v) or v == np.inf else np.inf


def nelder_mead(f: Callable[[np.ndarray], float], x0,
                *, max_iters: int = 5000, tol_f: float = 1e-9,
                tol_x: float = 1e-7) -> NMResult:
    """Minimize ``f`` from ``x0``.

    The initial simplex adds a per-coordinate step of
    ``0.05 * max(1, |x0_k|)`` to each coordinate in turn.  Iteration stops
    when the spread of vertex values falls below ``tol_f``, the maximum
    vertex distance from the best vertex falls below ``tol_x``, or
    ``max_iters`` is reached (in which case ``converged`` is False but the
    best vertex is still returned).
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    dim = x0.size
    verts = np.tile(x0, (dim + 1, 1))
    for k in range(dim):
        verts[k + 1, k] += 0.05 * max(1.0, abs(x0[k]))
    vals = np.array([_as_value(f(v)) for v in verts])
    nfev = dim + 1

    iters = 0
    converged = False
    while iters < max_iters:
        order = np.argsort(vals, kind="stable")
        verts, vals = verts[order], vals[order]
        spread = (vals[-1] - vals[0]
                  if np.isfinite(vals[0]) and np.isfinite(vals[-1])
                  else np.inf)
        diam = np.max(np.abs(verts[1:] - verts[0]))
        if spread <= tol_f or diam <= tol_x:
            converged = True
            break
        iters += 1

        centroid = np.mean(verts[:-1], axis=0)
        xr = centroid + (centroid - verts[-1])
        fr = _as_value(f(xr))
        nfev += 1
        if fr < vals[0]:
            xe = centroid + 2.0 * (centroid - verts[-1])
            fe = _as_value(f(xe))
            nfev += 1
            if fe < fr:
                verts[-1], vals[-1] = xe, fe
            else:
                verts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            verts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = _as_value(f(xc))
            nfev += 1
            if fc <= fr:
                verts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (verts[-1] - centroid)
            fc = _as_value(f(xc))
            nfev += 1
            if fc < vals[-1]:
                verts[-1], vals[-1] = xc, fc
                continue
        # shrink toward the best vertex
        for k in range(1, dim + 1):
            verts[k] = verts[0] + 0.5 * (verts[k] - verts[0])
            vals[k] = _as_value(f(verts[k]))
        nfev += dim

    order = np.argsort(vals, kind="stable")
    verts, vals = verts[order], vals[order]
    return NMResult(x=verts[0].copy(), fun=float(vals[0]),
                    converged=converged, iterations=iters, nfev=nfev)
