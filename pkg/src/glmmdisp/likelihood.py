"""Conditional log-likelihood of the mixed model.

The marginal contribution of each group integrates the exponential-family
likelihood against the Gaussian random-effect density.  The integral is
evaluated by Gauss-Hermite quadrature recentered at the mode of the group's
integrand and rescaled by the inverse Cholesky factor of the curvature there
(adaptive quadrature).  For one random-effect dimension everything is
vectorized across groups; two dimensions use a tensor-product rule per group.
The Gaussian-response model also has an exact marginal evaluation used as a
fast path and as a cross-check oracle.

For families with a bounded natural-parameter domain the integrand vanishes
continuously at the domain boundary (the conditional density's log tends to
minus infinity there), so quadrature nodes beyond the boundary contribute
exactly zero; no value is ever clamped.  A group whose integrand is not even
defined at the origin raises :class:`DomainError`, which the optimizer treats
as an infeasible parameter point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import Dataset, Group, Parameters
from .errors import ConvergenceError, DomainError
from .families import Family, get_family
from .quadrature import QuadratureSpec, gauss_legendre, hermite_grid

_GRAD_TOL = 1e-8
_MAX_NEWTON = 100
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_PANEL_TRIGGER = 4.5   # boundary distance, in mode-scaled units
_PANEL_REACH = 7.0     # panel half-span, in mode-scaled units


@dataclass(frozen=True)
class PosteriorMode:
    """Maximizer of a group's integrand and the curvature there."""

    u_star: np.ndarray
    hessian: np.ndarray  # negated second derivative at the mode (SPD)


def linear_predictor(p: Parameters, xa, xb, u=None) -> np.ndarray:
    """Natural parameter rows: (beta_a + u) . xa + beta_b . xb."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    coef_a = p.beta_a if u is None else p.beta_a + np.asarray(u, dtype=float)
    eta = xa @ coef_a
    if p.d_b:
        eta = eta + xb @ p.beta_b
    return eta


# ---------------------------------------------------------------------------
# posterior modes
# ---------------------------------------------------------------------------


def _group_feasible(family: Family, eta: np.ndarray) -> bool:
    return bool(np.all(family.natural_ok(eta)))


def _mode_newton(p: Parameters, family: Family, y, xa, base_eta,
                 label) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton ascent of one group's integrand, from u = 0."""
    d_a = p.d_a
    sig_inv = np.linalg.inv(p.sigma)
    t_stat = y @ xa  # sum of y * xa rows
    u = np.zeros(d_a)

    def value(u_vec):
        eta = base_eta + xa @ u_vec
        if not _group_feasible(family, eta):
            return -np.inf, None
        val = ((u_vec @ t_stat - float(np.sum(family.cumulant(eta)))) / p.phi
               - 0.5 * u_vec @ sig_inv @ u_vec)
        return val, eta

    g_val, eta = value(u)
    if not np.isfinite(g_val):
        raise DomainError(
            f"group {label!r}: natural parameter infeasible at u = 0")
    for _ in range(_MAX_NEWTON):
        grad = (t_stat - family.mean(eta) @ xa) / p.phi - sig_inv @ u
        hess = (xa.T * family.variance(eta)) @ xa / p.phi + sig_inv
        if np.linalg.norm(grad) <= _GRAD_TOL * (1.0 + abs(g_val)):
            return u, hess
        step = np.linalg.solve(hess, grad)
        alpha = 1.0
        for _ in range(60):
            cand = u + alpha * step
            c_val, c_eta = value(cand)
            if c_val >= g_val - 1e-12:
                u, g_val, eta = cand, c_val, c_eta
                break
            alpha *= 0.5
        else:
            raise ConvergenceError(
                f"group {label!r}: mode search stalled in backtracking")
    raise ConvergenceError(
        f"group {label!r}: mode search did not converge in "
        f"{_MAX_NEWTON} iterations")


def group_posterior_mode(p: Parameters, group: Group,
                         family) -> PosteriorMode:
    """Mode of one group's integrand, found by damped Newton from zero."""
    family = get_family(family)
    base = group.xa @ p.beta_a
    if p.d_b:
        base = base + group.xb @ p.beta_b
    u, hess = _mode_newton(p, family, group.y, group.xa, base, group.label)
    return PosteriorMode(u_star=u, hessian=hess)


def _modes_1d(p: Parameters, ds: Dataset, family: Family,
              base_eta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All-group Newton mode search for d_a = 1, vectorized across groups.

    Returns the modes, the curvature at the modes and the integrand values.
    """
    starts = ds.starts[:-1]
    gidx = ds.group_index
    xa1 = ds.xa[:, 0]
    y = ds.y
    t_stat = ds.group_yxa[:, 0]
    sig_inv = 1.0 / p.sigma[0, 0]
    phi = p.phi
    bounded = math.isfinite(family.natural_upper)

    def g_of(u):
        eta = base_eta + u[gidx] * xa1
        if bounded:
            ok = np.add.reduceat((eta < family.natural_upper).astype(np.int64),
                                 starts) == ds.group_sizes
        else:
            ok = np.ones(ds.m, dtype=bool)
        safe_eta = eta if not bounded else np.where(
            eta < family.natural_upper, eta, family.natural_upper - 1.0)
        bsum = np.add.reduceat(family.cumulant(safe_eta), starts)
        g = (u * t_stat - bsum) / phi - 0.5 * sig_inv * u * u
        return np.where(ok, g, -np.inf), eta, ok

    u = np.zeros(ds.m)
    g_val, eta, ok = g_of(u)
    if not np.all(ok):
        bad = ds.labels[int(np.argmin(ok))]
        raise DomainError(
            f"group {bad!r}: natural parameter infeasible at u = 0")

    curv = np.empty(ds.m)
    for _ in range(_MAX_NEWTON):
        b1 = family.mean(eta)
        b2 = family.variance(eta)
        grad = np.add.reduceat((y - b1) * xa1, starts) / phi - sig_inv * u
        curv = np.add.reduceat(b2 * xa1 * xa1, starts) / phi + sig_inv
        active = np.abs(grad) > _GRAD_TOL * (1.0 + np.abs(g_val))
        if not np.any(active):
            return u, curv, g_val
        step = np.where(active, grad / curv, 0.0)
        alpha = np.ones(ds.m)
        for _ in range(60):
            cand = u + alpha * step
            g_new, eta_new, _ = g_of(cand)
            reject = active & ~(g_new >= g_val - 1e-12)
            if not np.any(reject):
                break
            alpha[reject] *= 0.5
        else:
            bad = ds.labels[int(np.argmax(reject))]
            raise ConvergenceError(
                f"group {bad!r}: mode search stalled in backtracking")
        u = np.where(active, cand, u)
        g_val = np.where(active, g_new, g_val)
        eta = base_eta + u[gidx] * xa1
    raise ConvergenceError(
        f"mode search did not converge in {_MAX_NEWTON} iterations")


def posterior_modes(p: Parameters, ds: Dataset,
                    family) -> tuple[np.ndarray, np.ndarray]:
    """Modes and curvatures for every group: shapes (m, d_a), (m, d_a, d_a)."""
    family = get_family(family)
    if p.d_a == 1:
        base = ds.xa[:, 0] * p.beta_a[0]
        if p.d_b:
            base = base + ds.xb @ p.beta_b
        u, curv, _ = _modes_1d(p, ds, family, base)
        return u[:, None], curv[:, None, None]
    modes = np.empty((ds.m, p.d_a))
    hess = np.empty((ds.m, p.d_a, p.d_a))
    for i, grp in enumerate(ds.groups()):
        pm = group_posterior_mode(p, grp, family)
        modes[i] = pm.u_star
        hess[i] = pm.hessian
    return modes, hess


# ---------------------------------------------------------------------------
# log-likelihood
# ---------------------------------------------------------------------------


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    top = np.max(a, axis=0)
    return top + np.log(np.sum(np.exp(a - top), axis=0))


class _Flat1d(NamedTuple):
    """Flat per-observation arrays of a group subset (d_a = 1)."""

    y: np.ndarray
    xa1: np.ndarray
    base: np.ndarray
    gidx: np.ndarray
    starts: np.ndarray
    sizes: np.ndarray
    t_stat: np.ndarray


def _subset_1d(ds: Dataset, base_eta: np.ndarray, mask: np.ndarray) -> _Flat1d:
    sizes = ds.group_sizes[mask]
    obs = mask[ds.group_index]
    starts = np.concatenate(([0], np.cumsum(sizes)))[:-1]
    return _Flat1d(ds.y[obs], ds.xa[obs, 0], base_eta[obs],
                   np.repeat(np.arange(sizes.size), sizes), starts, sizes,
                   ds.group_yxa[mask, 0])


def _node_log_values(flat: _Flat1d, family: Family, phi: float,
                     sig_inv: float, u0: np.ndarray, du: np.ndarray,
                     coords: np.ndarray,
                     check_domain: bool) -> np.ndarray:
    """Integrand log-values at ``u = u0 + coords[k] * du`` per group.

    Returns shape (len(coords), m).  The linear node layout lets the
    observation-level natural parameters build by broadcasting instead of
    group gathers.  With ``check_domain``, (node, group) pairs whose natural
    parameter leaves the domain get -inf, the integrand's true limit there.
    """
    eta0 = flat.base + u0[flat.gidx] * flat.xa1
    step = du[flat.gidx] * flat.xa1
    eta = eta0 + coords[:, None] * step
    u = u0 + coords[:, None] * du
    upper = family.natural_upper
    if math.isfinite(upper):
        if check_domain:
            ok = np.minimum.reduceat(upper - eta, flat.starts, axis=1) > 0.0
        else:
            ok = True
        # values this close to the boundary carry no integrand mass; the
        # cap only protects the cumulant from illegal arguments
        eta = np.minimum(eta, upper - 1e-300)
    else:
        ok = True
    bsum = np.add.reduceat(family.cumulant(eta), flat.starts, axis=1)
    g = (u * flat.t_stat - bsum) / phi - 0.5 * sig_inv * u * u
    return g if ok is True else np.where(ok, g, -np.inf)


def _gh_log_integrals_1d(flat: _Flat1d, family: Family, phi: float,
                         sig_inv: float, center: np.ndarray,
                         scale: np.ndarray, z: np.ndarray,
                         logw: np.ndarray) -> np.ndarray:
    du = math.sqrt(2.0) * scale
    vals = logw[:, None] + _node_log_values(flat, family, phi, sig_inv,
                                            center, du, z, True)
    return 0.5 * math.log(2.0) + np.log(scale) + _logsumexp_rows(vals)


def _panel_log_integrals_1d(flat: _Flat1d, family: Family, phi: float,
                            sig_inv: float, lo: np.ndarray, hi: np.ndarray,
                            center: np.ndarray, order: int) -> np.ndarray:
    """Integrals of groups whose domain boundary lies inside the node span.

    Two Legendre panels split at the mode cover the feasible interval
    exactly, so no node ever falls outside the domain and the integrand's
    algebraic vanishing at the boundary sits at a panel endpoint where the
    interior-node rule is unaffected.  This converges fast where the
    recentered Hermite rule would stall on the boundary kink.
    """
    t, w = gauss_legendre(order)
    log_w = np.log(w)
    pieces = []
    for left, right in ((lo, center), (center, hi)):
        halfw = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        vals = (log_w[:, None] + np.log(halfw)
                + _node_log_values(flat, family, phi, sig_inv, mid, halfw,
                                   t, False))
        pieces.append(vals)
    return _logsumexp_rows(np.vstack(pieces))


def _integrals_1d(p: Parameters, ds: Dataset, family: Family,
                  quad: QuadratureSpec, base_eta: np.ndarray) -> np.ndarray:
    """Log of each group's integral, d_a = 1, vectorized across groups."""
    sig_inv = 1.0 / p.sigma[0, 0]
    phi = p.phi
    bounded = math.isfinite(family.natural_upper)
    z, logw = hermite_grid(1, quad.nodes_per_dim)
    z = z[:, 0]

    if not quad.adaptive:
        flat = _subset_1d(ds, base_eta, np.ones(ds.m, dtype=bool))
        center = np.zeros(ds.m)
        scale = np.full(ds.m, math.sqrt(p.sigma[0, 0]))
        return _gh_log_integrals_1d(flat, family, phi, sig_inv, center,
                                    scale, z, logw)

    center, curv, _ = _modes_1d(p, ds, family, base_eta)
    scale = 1.0 / np.sqrt(curv)

    paneled = np.zeros(ds.m, dtype=bool)
    u_hi = np.full(ds.m, np.inf)
    u_lo = np.full(ds.m, -np.inf)
    if bounded:
        xa1 = ds.xa[:, 0]
        safe = np.where(xa1 != 0.0, xa1, 1.0)
        ratio = (family.natural_upper - base_eta) / safe
        u_hi = np.minimum.reduceat(np.where(xa1 > 0, ratio, np.inf),
                                   ds.starts[:-1])
        u_lo = np.maximum.reduceat(np.where(xa1 < 0, ratio, -np.inf),
                                   ds.starts[:-1])
        # a boundary within ~4.5 scaled units of the mode makes the direct
        # rule's boundary kink visible; those groups get panel integration
        span = _PANEL_TRIGGER * math.sqrt(2.0) * scale
        paneled = (u_hi - center < span) | (center - u_lo < span)

    out = np.empty(ds.m)
    direct = ~paneled
    if np.any(direct):
        flat = _subset_1d(ds, base_eta, direct)
        out[direct] = _gh_log_integrals_1d(
            flat, family, phi, sig_inv, center[direct], scale[direct], z,
            logw)
    if np.any(paneled):
        flat = _subset_1d(ds, base_eta, paneled)
        c = center[paneled]
        reach = _PANEL_REACH * scale[paneled]
        lo = np.maximum(u_lo[paneled], c - reach)
        hi = np.minimum(u_hi[paneled], c + reach)
        out[paneled] = _panel_log_integrals_1d(
            flat, family, phi, sig_inv, lo, hi, c, quad.nodes_per_dim)
    return out


def _integral_general(p: Parameters, family: Family, quad: QuadratureSpec,
                      grp: Group, base_eta: np.ndarray) -> float:
    """Log integral for one group, tensor-product rule, d_a = 2."""
    d_a = p.d_a
    if quad.adaptive:
        u0, hess = _mode_newton(p, family, grp.y, grp.xa, base_eta, grp.label)
        low = np.linalg.cholesky(np.linalg.inv(hess))
    else:
        u0 = np.zeros(d_a)
        low = np.linalg.cholesky(p.sigma)
    z, logw = hermite_grid(d_a, quad.nodes_per_dim)
    u_nodes = u0 + math.sqrt(2.0) * z @ low.T          # (K^d, d_a)
    eta = base_eta[:, None] + grp.xa @ u_nodes.T       # (n_i, K^d)
    if math.isfinite(family.natural_upper):
        feasible = eta < family.natural_upper
        ok = np.all(feasible, axis=0)
        eta = np.where(feasible, eta, family.natural_upper - 1.0)
    else:
        ok = np.ones(u_nodes.shape[0], dtype=bool)
    sig_inv = np.linalg.inv(p.sigma)
    t_stat = grp.y @ grp.xa
    g = ((u_nodes @ t_stat - np.sum(family.cumulant(eta), axis=0)) / p.phi
         - 0.5 * np.einsum("ki,ij,kj->k", u_nodes, sig_inv, u_nodes))
    # nodes beyond the domain boundary contribute zero to the integral
    vals = np.where(ok, logw + g, -np.inf)
    top = float(np.max(vals))
    total = top + math.log(float(np.sum(np.exp(vals - top))))
    _, logdet = np.linalg.slogdet(low)
    return 0.5 * d_a * math.log(2.0) + logdet + total


def log_likelihood(p: Parameters, ds: Dataset, family,
                   quad: QuadratureSpec | None = None) -> float:
    """Conditional log-likelihood via adaptive Gauss-Hermite quadrature.

    Supports d_a in {1, 2}; the Gaussian-response model additionally has the
    exact :func:`gaussian_marginal_loglik` for any d_a.
    """
    family = get_family(family)
    quad = quad or QuadratureSpec()
    if p.d_a != ds.d_a or p.d_b != ds.d_b:
        raise ValueError("parameter dimensions do not match the dataset")
    if p.d_a > 2:
        raise ValueError("quadrature path supports at most two "
                         "random-effect dimensions")
    if not np.all(family.in_support(ds.y)):
        bad = int(np.argmin(family.in_support(ds.y)))
        raise DomainError(f"response out of support at row {bad}")

    base_eta = ds.xa @ p.beta_a
    if p.d_b:
        base_eta = base_eta + ds.xb @ p.beta_b

    chol = p.cholesky()
    log_det_sigma = 2.0 * float(np.sum(np.log(np.diag(chol))))
    scaled_sum, unscaled_sum = ds.response_term_sums(family)
    d_val, _, _ = family.normalizer_suite(p.phi)

    const = (-0.5 * ds.m * (p.d_a * math.log(2.0 * math.pi) + log_det_sigma)
             + (float(ds.y @ base_eta) + scaled_sum) / p.phi
             - ds.n_obs * d_val - unscaled_sum)

    if p.d_a == 1:
        log_ints = _integrals_1d(p, ds, family, quad, base_eta)
        return const + float(np.sum(log_ints))
    total = const
    for i, grp in enumerate(ds.groups()):
        s, e = ds.starts[i], ds.starts[i + 1]
        total += _integral_general(p, family, quad, grp, base_eta[s:e])
    return float(total)


def gaussian_marginal_loglik(p: Parameters, ds: Dataset) -> float:
    """Exact Gaussian-response log-likelihood from the marginal normal law.

    Each group's responses are jointly normal with covariance
    ``phi * I + xa Sigma xa^T``; the evaluation uses the low-rank structure
    so the cost is linear in the number of observations.
    """
    if p.d_a != ds.d_a or p.d_b != ds.d_b:
        raise ValueError("parameter dimensions do not match the dataset")
    resid = ds.y - ds.xa @ p.beta_a
    if p.d_b:
        resid = resid - ds.xb @ p.beta_b
    phi = p.phi
    sig_inv = np.linalg.inv(p.sigma)
    chol = p.cholesky()
    log_det_sigma = 2.0 * float(np.sum(np.log(np.diag(chol))))

    total = -0.5 * ds.n_obs * math.log(2.0 * math.pi)
    for i in range(ds.m):
        s, e = ds.starts[i], ds.starts[i + 1]
        xa_g = ds.xa[s:e]
        r = resid[s:e]
        n_i = e - s
        cap = sig_inv + xa_g.T @ xa_g / phi
        try:
            cap_chol = np.linalg.cholesky(cap)
        except np.linalg.LinAlgError:
            raise ValueError("marginal covariance is numerically singular")
        xr = xa_g.T @ r
        w = np.linalg.solve(cap_chol, xr)
        quad_form = (r @ r) / phi - (w @ w) / (phi * phi)
        log_det = (n_i * math.log(phi) + log_det_sigma
                   + 2.0 * float(np.sum(np.log(np.diag(cap_chol)))))
        total += -0.5 * (log_det + quad_form)
    return float(total)
