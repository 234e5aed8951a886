"""Asymptotic covariance blocks and studentized confidence intervals.

The limiting covariance of the scaled estimator vector is block diagonal:
the random-effect-partnered coefficients and the covariance parameters have
order 1/m variances, while the fixed-only coefficients and the dispersion
have order 1/(m n) variances.  All blocks are evaluated at plug-in estimates
with the realized number of groups ``m`` and average group size ``n``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Dataset, Parameters
from .families import get_family
from .likelihood import posterior_modes
from .matrixops import duplication_pinv, vech
from .special import normal_quantile

_COND_LIMIT = 1e12


class Interval(NamedTuple):
    lower: float
    upper: float
    truncated: bool


@dataclass
class AsymptoticCovariance:
    """Diagonal blocks of the estimator's asymptotic covariance.

    Off-diagonal blocks are identically zero: the estimator components are
    asymptotically orthogonal.
    """

    beta_a: np.ndarray      # (d_a, d_a)
    beta_b: np.ndarray      # (d_b, d_b)
    vech_sigma: np.ndarray  # (d*, d*) with d* = d_a (d_a + 1) / 2
    phi_var: float


def fixed_only_covariance_scale(ds: Dataset, p: Parameters, family,
                                on_singular: str = "error") -> np.ndarray:
    """Plug-in scale matrix for the fixed-only coefficient covariance.

    For each group the weighted second-moment matrix of the combined
    predictors is formed at the group's posterior mode; the returned matrix
    is the inverse of the average inverted lower-right block of each group
    matrix's inverse.  The fixed-only coefficient covariance is then
    ``phi * scale / (m n)``.

    A group in which some predictor does not vary has an exactly singular
    second-moment matrix.  By default this raises; ``on_singular="skip"``
    instead averages over the well-conditioned groups and warns, which keeps
    the estimator usable on real data with, say, single-sex schools.
    """
    family = get_family(family)
    if ds.d_b < 1:
        raise ValueError("no fixed-only predictors: the scale matrix is empty")
    if on_singular not in ("error", "skip"):
        raise ValueError("on_singular must be 'error' or 'skip'")
    modes, _ = posterior_modes(p, ds, family)
    d = ds.d_a + ds.d_b
    bb = slice(ds.d_a, d)
    acc = np.zeros((ds.d_b, ds.d_b))
    used = 0
    for i in range(ds.m):
        s, e = ds.starts[i], ds.starts[i + 1]
        eta = ds.xa[s:e] @ (p.beta_a + modes[i])
        if ds.d_b:
            eta = eta + ds.xb[s:e] @ p.beta_b
        family.require_natural(eta)
        w = family.variance(eta)
        x = np.column_stack([ds.xa[s:e], ds.xb[s:e]])
        omega = (x.T * w) @ x / (e - s)
        if np.linalg.cond(omega) > _COND_LIMIT:
            if on_singular == "error":
                raise np.linalg.LinAlgError(
                    f"group {ds.labels[i]!r}: singular weighted "
                    f"second-moment matrix")
            continue
        block = np.linalg.inv(omega)[bb, bb]
        acc += np.linalg.inv(block)
        used += 1
    if used < max(2, ds.m // 2):
        raise np.linalg.LinAlgError(
            f"only {used} of {ds.m} groups have a well-conditioned "
            f"second-moment matrix")
    if used < ds.m:
        warnings.warn(f"{ds.m - used} of {ds.m} groups skipped in the "
                      f"fixed-only covariance scale (singular group "
                      f"second-moment matrices)")
    return np.linalg.inv(acc / used)


def asymptotic_covariance(ds: Dataset, p: Parameters, family,
                          on_singular: str = "error") -> AsymptoticCovariance:
    """All four diagonal covariance blocks at plug-in estimates."""
    family = get_family(family)
    m, n = ds.m, ds.n_bar
    if ds.d_b:
        scale = fixed_only_covariance_scale(ds, p, family, on_singular)
        beta_b = p.phi * scale / (m * n)
    else:
        beta_b = np.zeros((0, 0))
    dup_pinv = duplication_pinv(p.d_a)
    vech_sigma = 2.0 * dup_pinv @ np.kron(p.sigma, p.sigma) @ dup_pinv.T / m
    phi_var = 1.0 / (family.dispersion_information(p.phi) * m * n)
    return AsymptoticCovariance(beta_a=p.sigma / m, beta_b=beta_b,
                                vech_sigma=vech_sigma, phi_var=phi_var)


def dispersion_interval(phi_hat: float, family, m: int, n: float,
                        alpha: float) -> Interval:
    """Wald interval for the dispersion from its limiting normal law.

    The lower endpoint is truncated at zero (and flagged) when the plain
    interval crosses it.
    """
    if not (phi_hat > 0):
        raise ValueError("phi_hat must be positive")
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    family = get_family(family)
    z = normal_quantile(1.0 - 0.5 * alpha)
    half = z / math.sqrt(family.dispersion_information(phi_hat) * m * n)
    lower, upper = phi_hat - half, phi_hat + half
    truncated = lower < 0.0
    return Interval(max(lower, 0.0), upper, truncated)


def dispersion_interval_general(phi_hat: float, curvatures,
                                alpha: float) -> Interval:
    """Dispersion interval for a general two-parameter exponential family.

    ``curvatures`` holds, per observation, the second derivative of the
    observation-level normalizer with respect to the reciprocal dispersion,
    evaluated at the fitted value.  Their sum estimates the total information.
    """
    if not (phi_hat > 0):
        raise ValueError("phi_hat must be positive")
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    total = float(np.sum(np.asarray(curvatures, dtype=float)))
    if not (total > 0):
        raise ValueError(f"curvature sum must be positive, got {total}")
    z = normal_quantile(1.0 - 0.5 * alpha)
    half = z * phi_hat * phi_hat / math.sqrt(total)
    lower, upper = phi_hat - half, phi_hat + half
    truncated = lower < 0.0
    return Interval(max(lower, 0.0), upper, truncated)


@dataclass
class CiRow:
    name: str
    estimate: float
    lower: float
    upper: float
    scale: str  # "raw" or "sd"
    truncated: bool = False


@dataclass
class CiTable:
    rows: list = field(default_factory=list)
    alpha: float = 0.05

    def row(self, name: str) -> CiRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "estimate", "lower", "upper", "scale"])
            for r in self.rows:
                writer.writerow([r.name, f"{r.estimate:.10g}",
                                 f"{r.lower:.10g}", f"{r.upper:.10g}", r.scale])

    def to_text(self) -> str:
        width = max(len(r.name) for r in self.rows) if self.rows else 4
        pct = 100.0 * (1.0 - self.alpha)
        lines = [f"{'parameter':<{width}}  {'estimate':>12}  "
                 f"{pct:.0f}% confidence interval"]
        for r in self.rows:
            mark = " (truncated)" if r.truncated else ""
            lines.append(f"{r.name:<{width}}  {r.estimate:>12.4f}  "
                         f"({r.lower:.4f}, {r.upper:.4f}){mark}")
        return "\n".join(lines)


def _wald(name, est, var, z, scale="raw", positive=False) -> CiRow:
    half = z * math.sqrt(max(var, 0.0))
    lower, upper = est - half, est + half
    truncated = positive and lower < 0.0
    return CiRow(name, est, max(lower, 0.0) if positive else lower,
                 upper, scale, truncated)


def confidence_table(fit, ds: Dataset, family, alpha: float = 0.05,
                     sd_method: str = "delta",
                     allow_unconverged: bool = False) -> CiTable:
    """Estimates with Wald intervals for every parameter, plus sd-scale rows.

    Emits raw-scale rows for each coefficient, each distinct covariance
    entry and the dispersion, and sd-scale rows for the random-effect
    standard deviations and the root dispersion.  Correlations appear as
    estimates without intervals.  ``sd_method`` picks how sd-scale intervals
    arise: ``"delta"`` propagates the variance, ``"transform"`` takes square
    roots of the raw-scale endpoints.
    """
    if not fit.converged and not allow_unconverged:
        raise ValueError("fit did not converge; intervals would be unreliable")
    if sd_method not in ("delta", "transform"):
        raise ValueError("sd_method must be 'delta' or 'transform'")
    family = get_family(family)
    p = fit.params
    cov = fit.asym_cov or asymptotic_covariance(ds, p, family)
    fit.asym_cov = cov
    z = normal_quantile(1.0 - 0.5 * alpha)
    table = CiTable(alpha=alpha)

    for k in range(p.d_a):
        table.rows.append(_wald(f"beta_a[{k}]", float(p.beta_a[k]),
                                float(cov.beta_a[k, k]), z))
    for k in range(p.d_b):
        table.rows.append(_wald(f"beta_b[{k}]", float(p.beta_b[k]),
                                float(cov.beta_b[k, k]), z))

    vech_est = vech(p.sigma)
    names = [(i, j) for j in range(p.d_a) for i in range(j, p.d_a)]
    for pos, (i, j) in enumerate(names):
        table.rows.append(_wald(f"sigma_cov[{i},{j}]", float(vech_est[pos]),
                                float(cov.vech_sigma[pos, pos]), z,
                                positive=(i == j)))

    for k in range(p.d_a):
        pos = names.index((k, k))
        var_kk = float(cov.vech_sigma[pos, pos])
        sd = math.sqrt(p.sigma[k, k])
        if sd_method == "delta":
            row = _wald(f"sigma_sd[{k}]", sd, var_kk / (4.0 * p.sigma[k, k]),
                        z, scale="sd", positive=True)
        else:
            raw = _wald("tmp", p.sigma[k, k], var_kk, z, positive=True)
            row = CiRow(f"sigma_sd[{k}]", sd, math.sqrt(max(raw.lower, 0.0)),
                        math.sqrt(max(raw.upper, 0.0)), "sd", raw.truncated)
        table.rows.append(row)

    for i in range(p.d_a):
        for j in range(i):
            rho = p.sigma[i, j] / math.sqrt(p.sigma[i, i] * p.sigma[j, j])
            table.rows.append(CiRow(f"sigma_corr[{i},{j}]", rho, rho, rho,
                                    "raw"))

    phi_int = dispersion_interval(p.phi, family, ds.m, ds.n_bar, alpha)
    table.rows.append(CiRow("phi", p.phi, phi_int.lower, phi_int.upper,
                            "raw", phi_int.truncated))
    sqrt_phi = math.sqrt(p.phi)
    if sd_method == "delta":
        table.rows.append(_wald("sqrt_phi", sqrt_phi,
                                cov.phi_var / (4.0 * p.phi), z,
                                scale="sd", positive=True))
    else:
        table.rows.append(CiRow("sqrt_phi", sqrt_phi,
                                math.sqrt(max(phi_int.lower, 0.0)),
                                math.sqrt(max(phi_int.upper, 0.0)),
                                "sd", phi_int.truncated))
    return table
