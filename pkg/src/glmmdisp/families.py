"""Exponential dispersion families: Gaussian, Gamma and inverse Gaussian.

Each family describes densities of the form

    p(y) = exp[{y*eta - cumulant(eta) + scaled_term(y)}/phi
               - normalizer(phi) - unscaled_term(y)] * support(y)

where ``eta`` is the natural parameter and ``phi > 0`` the dispersion.
A family supplies the cumulant function with three derivatives, the two
response offset terms, the dispersion normalizer with two derivatives,
and an exact sampler.  All array arguments are handled elementwise.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .special import digamma, trigamma

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class ResponseTerms(NamedTuple):
    scaled: np.ndarray      # added to the density exponent divided by phi
    unscaled: np.ndarray    # subtracted from the exponent as-is


class NormalizerSuite(NamedTuple):
    value: float
    d1: float
    d2: float


class Family:
    """Base class; concrete families are stateless singletons."""

    name: str = ""
    # Exclusive upper bound of the natural-parameter domain.
    natural_upper: float = math.inf

    # -- natural parameter domain -------------------------------------

    def natural_ok(self, eta) -> np.ndarray:
        return np.isfinite(eta) & (np.asarray(eta) < self.natural_upper)

    def require_natural(self, eta) -> None:
        eta = np.asarray(eta, dtype=float)
        if not np.all(self.natural_ok(eta)):
            raise DomainError(
                f"natural parameter outside the {self.name} domain "
                f"(requires eta < {self.natural_upper})")

    # -- cumulant function and derivatives ----------------------------

    def cumulant(self, eta):
        raise NotImplementedError

    def mean(self, eta):
        """First derivative of the cumulant: the mean response."""
        raise NotImplementedError

    def variance(self, eta):
        """Second derivative of the cumulant: the unit variance function."""
        raise NotImplementedError

    def third_cumulant(self, eta):
        """Third derivative of the cumulant."""
        raise NotImplementedError

    def cumulant_suite(self, eta: float) -> tuple[float, float, float, float]:
        """Cumulant value and first three derivatives at a scalar ``eta``."""
        self.require_natural(eta)
        return (float(self.cumulant(eta)), float(self.mean(eta)),
                float(self.variance(eta)), float(self.third_cumulant(eta)))

    def canonical_link(self, mu):
        """Inverse of ``mean``: natural parameter from the mean."""
        raise NotImplementedError

    def variance_from_mean(self, mu):
        """Unit variance function evaluated at a mean value."""
        return self.variance(self.canonical_link(mu))

    # -- response terms ------------------------------------------------

    def in_support(self, y) -> np.ndarray:
        raise NotImplementedError

    def response_terms(self, y) -> ResponseTerms:
        raise NotImplementedError

    # -- dispersion ------------------------------------------------------

    def normalizer_suite(self, phi: float) -> NormalizerSuite:
        """Dispersion normalizer and its first two derivatives."""
        raise NotImplementedError

    def dispersion_information(self, phi: float) -> float:
        """Per-observation information for the dispersion parameter.

        Equals ``2 d1 / phi + d2`` in terms of the normalizer derivatives;
        strictly positive for every supported family.
        """
        _, d1, d2 = self.normalizer_suite(phi)
        return 2.0 * d1 / phi + d2

    # -- density and sampling -------------------------------------------

    def log_density(self, y, eta, phi: float):
        """Elementwise log density; ``-inf`` off the support."""
        _check_phi(phi)
        self.require_natural(eta)
        y = np.asarray(y, dtype=float)
        ok = self.in_support(y)
        ys = np.where(ok, y, 1.0)  # placeholder values are never read
        scaled, unscaled = self.response_terms(ys)
        d, _, _ = self.normalizer_suite(phi)
        out = (ys * eta - self.cumulant(eta) + scaled) / phi - d - unscaled
        return np.where(ok, out, -np.inf)

    def sample(self, eta, phi: float, rng: np.random.Generator):
        """Exact draws from the family at the given natural parameters."""
        raise NotImplementedError


def _check_phi(phi: float) -> None:
    if not (phi > 0.0) or not math.isfinite(phi):
        raise DomainError(f"dispersion must be positive and finite, got {phi}")


class Gaussian(Family):
    name = "gaussian"
    natural_upper = math.inf

    def cumulant(self, eta):
        eta = np.asarray(eta, dtype=float)
        return 0.5 * eta * eta

    def mean(self, eta):
        return np.asarray(eta, dtype=float)

    def variance(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))

    def third_cumulant(self, eta):
        return np.zeros_like(np.asarray(eta, dtype=float))

    def canonical_link(self, mu):
        return np.asarray(mu, dtype=float)

    def in_support(self, y):
        return np.isfinite(np.asarray(y, dtype=float))

    def response_terms(self, y):
        y = np.asarray(y, dtype=float)
        return ResponseTerms(-0.5 * y * y, np.full_like(y, _HALF_LOG_2PI))

    def normalizer_suite(self, phi):
        _check_phi(phi)
        return NormalizerSuite(0.5 * math.log(phi), 0.5 / phi, -0.5 / (phi * phi))

    def sample(self, eta, phi, rng):
        _check_phi(phi)
        self.require_natural(eta)
        return rng.normal(loc=eta, scale=math.sqrt(phi))


class Gamma(Family):
    name = "gamma"
    natural_upper = 0.0

    def cumulant(self, eta):
        return -np.log(-np.asarray(eta, dtype=float))

    def mean(self, eta):
        return -1.0 / np.asarray(eta, dtype=float)

    def variance(self, eta):
        eta = np.asarray(eta, dtype=float)
        return 1.0 / (eta * eta)

    def third_cumulant(self, eta):
        eta = np.asarray(eta, dtype=float)
        return -2.0 / (eta * eta * eta)

    def canonical_link(self, mu):
        return -1.0 / np.asarray(mu, dtype=float)

    def in_support(self, y):
        y = np.asarray(y, dtype=float)
        return np.isfinite(y) & (y > 0.0)

    def response_terms(self, y):
        ly = np.log(np.asarray(y, dtype=float))
        return ResponseTerms(ly, ly)

    def normalizer_suite(self, phi):
        _check_phi(phi)
        inv = 1.0 / phi
        lp = math.log(phi)
        value = inv * lp + math.lgamma(inv)
        d1 = (1.0 - lp - digamma(inv)) / (phi * phi)
        d2 = ((2.0 * lp + 2.0 * digamma(inv) - 3.0) / phi ** 3
              + trigamma(inv) / phi ** 4)
        return NormalizerSuite(value, d1, d2)

    def sample(self, eta, phi, rng):
        _check_phi(phi)
        self.require_natural(eta)
        eta = np.asarray(eta, dtype=float)
        # shape 1/phi, rate -eta/phi => mean -1/eta, variance phi/eta^2
        return rng.gamma(shape=1.0 / phi, scale=-phi / eta)


class InverseGaussian(Family):
    name = "inverse_gaussian"
    natural_upper = 0.0

    def cumulant(self, eta):
        return -np.sqrt(-2.0 * np.asarray(eta, dtype=float))

    def mean(self, eta):
        return 1.0 / np.sqrt(-2.0 * np.asarray(eta, dtype=float))

    def variance(self, eta):
        return (-2.0 * np.asarray(eta, dtype=float)) ** -1.5

    def third_cumulant(self, eta):
        return 3.0 * (-2.0 * np.asarray(eta, dtype=float)) ** -2.5

    def canonical_link(self, mu):
        mu = np.asarray(mu, dtype=float)
        return -0.5 / (mu * mu)

    def in_support(self, y):
        y = np.asarray(y, dtype=float)
        return np.isfinite(y) & (y > 0.0)

    def response_terms(self, y):
        y = np.asarray(y, dtype=float)
        return ResponseTerms(-0.5 / y, _HALF_LOG_2PI + 1.5 * np.log(y))

    def normalizer_suite(self, phi):
        _check_phi(phi)
        return NormalizerSuite(0.5 * math.log(phi), 0.5 / phi, -0.5 / (phi * phi))

    def sample(self, eta, phi, rng):
        _check_phi(phi)
        self.require_natural(eta)
        mu = self.mean(eta)
        # mean mu, shape parameter 1/phi => variance phi * mu^3
        return rng.wald(mean=mu, scale=1.0 / phi)


GAUSSIAN = Gaussian()
GAMMA = Gamma()
INVERSE_GAUSSIAN = InverseGaussian()

_REGISTRY = {
    "gaussian": GAUSSIAN,
    "normal": GAUSSIAN,
    "gamma": GAMMA,
    "inverse_gaussian": INVERSE_GAUSSIAN,
    "inversegaussian": INVERSE_GAUSSIAN,
    "wald": INVERSE_GAUSSIAN,
}


def get_family(name) -> Family:
    """Look up a family by name; passes instances through unchanged."""
    if isinstance(name, Family):
        return name
    key = str(name).strip().lower().replace("-", "_").replace(" ", "_")
    try:
        return _REGISTRY[key]
    except KeyError:
        raise ValueError(
            f"unknown family {name!r}; choose from gaussian, gamma, "
            f"inverse_gaussian") from None
