"""Maximum likelihood fitting by simplex search over unconstrained parameters.

Starting values come from a fixed-effects-only GLM solved by iteratively
reweighted least squares with the canonical link; the random-effect covariance
starts at 0.25 times the identity and the dispersion at the Pearson estimate.
Infeasible parameter points (natural-parameter domain violations, failed mode
searches) enter the minimizer as ``+inf`` so the simplex retreats from them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Parameters, from_unconstrained, to_unconstrained
from .errors import ConvergenceError, DomainError
from .families import Family, get_family
from .likelihood import gaussian_marginal_loglik, log_likelihood, posterior_modes
from .neldermead import nelder_mead
from .quadrature import QuadratureSpec

_IRLS_MAX = 30


@dataclass
class FitOptions:
    """Tuning knobs of the simplex fit."""

    max_iters: int = 5000
    tol_f: float = 1e-9
    tol_x: float = 1e-7
    restarts: int = 1
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    seed: int = 0   # stream for restart perturbations

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.tol_f > 0 and self.tol_x > 0):
            raise ValueError("tolerances must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class FitResult:
    params: Parameters
    loglik: float
    converged: bool
    iters: int
    start: Parameters
    asym_cov: object = None  # filled by the inference module


class _IrlsFailure(Exception):
    pass


def _irls(y: np.ndarray, design: np.ndarray, family: Family) -> np.ndarray:
    """Canonical-link GLM coefficients; raises _IrlsFailure on divergence."""
    mu = y.astype(float).copy()
    if family.name == "gaussian":
        # canonical link is the identity: plain least squares in one step
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        return beta
    eta = family.canonical_link(mu)
    beta_prev = None
    for _ in range(_IRLS_MAX):
        w = family.variance(eta)
        z = eta + (y - family.mean(eta)) / w
        wx = design * w[:, None]
        try:
            beta = np.linalg.solve(design.T @ wx, wx.T @ z)
        except np.linalg.LinAlgError:
            beta, *_ = np.linalg.lstsq(design * np.sqrt(w)[:, None],
                                       np.sqrt(w) * z, rcond=None)
        if not np.all(np.isfinite(beta)):
            raise _IrlsFailure("non-finite coefficients")
        eta_new = design @ beta
        for _ in range(20):
            if np.all(family.natural_ok(eta_new)):
                break
            if beta_prev is None:
                raise _IrlsFailure("first step leaves the natural domain")
            beta = 0.5 * (beta + beta_prev)
            eta_new = design @ beta
        else:
            raise _IrlsFailure("could not stay inside the natural domain")
        delta = np.max(np.abs(eta_new - eta))
        eta, beta_prev = eta_new, beta
        if delta <= 1e-10 * (1.0 + np.max(np.abs(eta))):
            return beta
    return beta


def starting_values(ds: Dataset, family) -> Parameters:
    """Initial parameters for the simplex search.

    Fixed effects from a fixed-effects-only GLM (IRLS, canonical link), the
    random-effect covariance at 0.25 I, the dispersion from the Pearson
    estimate at those coefficients with zero random effects.  On IRLS
    divergence all coefficients fall back to zero; a non-positive Pearson
    estimate (for instance a degenerate constant response) falls back to
    dispersion one.  Both fallbacks warn.
    """
    family = get_family(family)
    design = np.column_stack([ds.xa, ds.xb])
    sigma0 = 0.25 * np.eye(ds.d_a)
    try:
        beta = _irls(ds.y, design, family)
    except _IrlsFailure as exc:
        warnings.warn(f"IRLS starting values diverged ({exc}); "
                      f"falling back to zero coefficients")
        return Parameters(np.zeros(ds.d_a), np.zeros(ds.d_b), sigma0, 1.0)
    params = Parameters(beta[:ds.d_a], beta[ds.d_a:], sigma0, 1.0)
    try:
        phi = pearson_dispersion(ds, params, family, use_modes=False)
    except (DomainError, ZeroDivisionError):
        phi = float("nan")
    # a degenerate (e.g. constant) response leaves only rounding noise in
    # the residuals; treat that as "no usable dispersion estimate"
    floor = 1e-12 * max(1.0, float(np.mean(ds.y ** 2)))
    if not (phi > floor and math.isfinite(phi)):
        warnings.warn("Pearson starting dispersion is not positive; "
                      "falling back to dispersion 1")
        return params
    return Parameters(params.beta_a, params.beta_b, sigma0, phi)


def pearson_dispersion(ds: Dataset, p: Parameters, family,
                       use_modes: bool = False,
                       ddof: int | None = None) -> float:
    """Moment-based dispersion estimate from squared standardized residuals.

    Means are evaluated at zero random effects, or at the per-group posterior
    modes when ``use_modes`` is set.  The denominator subtracts one degree of
    freedom per fixed-effect coefficient unless ``ddof`` overrides it.
    """
    family = get_family(family)
    eta = ds.xa @ p.beta_a
    if p.d_b:
        eta = eta + ds.xb @ p.beta_b
    if use_modes:
        modes, _ = posterior_modes(p, ds, family)
        eta = eta + np.sum(ds.xa * modes[ds.group_index], axis=1)
    family.require_natural(eta)
    mu = family.mean(eta)
    v = family.variance_from_mean(mu)
    dof = ds.n_obs - (p.d_a + p.d_b if ddof is None else ddof)
    if dof <= 0:
        raise ValueError("non-positive residual degrees of freedom")
    return float(np.sum((ds.y - mu) ** 2 / v) / dof)


def _support_check(ds: Dataset, family: Family) -> None:
    ok = family.in_support(ds.y)
    if not np.all(ok):
        row = int(np.argmin(ok))
        raise DomainError(
            f"response out of the {family.name} support at row {row} "
            f"(y = {ds.y[row]!r})")


def fit_mle(ds: Dataset, family, opts: FitOptions | None = None) -> FitResult:
    """Maximize the conditional log-likelihood over all model parameters.

    Runs Nelder-Mead from the IRLS starting point plus ``opts.restarts``
    additional runs from multiplicatively perturbed starts, keeping the best
    final value.  ``iters`` reports the winning run's iteration count.
    """
    family = get_family(family)
    opts = opts or FitOptions()
    _support_check(ds, family)
    start = starting_values(ds, family)
    gaussian = family.name == "gaussian"

    def objective(theta: np.ndarray) -> float:
        try:
            p = from_unconstrained(theta, ds.d_a, ds.d_b)
        except (ValueError, OverflowError):
            return np.inf
        try:
            if gaussian:
                ll = gaussian_marginal_loglik(p, ds)
            else:
                ll = log_likelihood(p, ds, family, opts.quadrature)
        except (DomainError, ConvergenceError, ValueError,
                FloatingPointError, np.linalg.LinAlgError):
            return np.inf
        return -ll if math.isfinite(ll) else np.inf

    x0 = to_unconstrained(start)
    rng = np.random.default_rng(opts.seed)
    starts = [x0]
    for _ in range(opts.restarts):
        starts.append(x0 * (1.0 + 0.1 * rng.standard_normal(x0.size)))

    best = None
    for x_init in starts:
        res = nelder_mead(objective, x_init, max_iters=opts.max_iters,
                          tol_f=opts.tol_f, tol_x=opts.tol_x)
        if best is None or res.fun < best.fun:
            best = res
    if not math.isfinite(best.fun):
        raise DomainError("all starting points are infeasible for the "
                          "likelihood; check the data/family combination")
    params = from_unconstrained(best.x, ds.d_a, ds.d_b)
    return FitResult(params=params, loglik=-best.fun, converged=best.converged,
                     iters=best.iterations, start=start)
