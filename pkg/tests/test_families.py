import math

import numpy as np
import pytest
from scipy.integrate import quad

from glmmdisp.errors import DomainError
from glmmdisp.families import (GAMMA, GAUSSIAN, INVERSE_GAUSSIAN, get_family)

from conftest import central_diff, mp_normalizer_derivs, mp_psi_curvature

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
PI2_6 = math.pi ** 2 / 6.0

FAMILIES = [GAUSSIAN, GAMMA, INVERSE_GAUSSIAN]
ETA_GRID = {
    "gaussian": [-1.0, 0.5, 2.0],
    "gamma": [-0.5, -2.0, -5.0],
    "inverse_gaussian": [-0.2, -1.0, -3.0],
}


class TestCumulantSuite:
    def test_gaussian_at_zero(self):
        assert GAUSSIAN.cumulant_suite(0.0) == pytest.approx((0, 0, 1, 0))

    def test_gamma_at_minus_one(self):
        assert GAMMA.cumulant_suite(-1.0) == pytest.approx((0, 1, 1, 2))

    def test_inverse_gaussian_at_minus_half(self):
        assert INVERSE_GAUSSIAN.cumulant_suite(-0.5) == pytest.approx(
            (-1, 1, 1, 3))

    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
    def test_derivatives_match_finite_differences(self, family):
        for eta in ETA_GRID[family.name]:
            _, b1, b2, b3 = family.cumulant_suite(eta)
            h = 1e-5 * max(1.0, abs(eta))
            d1, d2 = central_diff(lambda e: float(family.cumulant(e)), eta, h)
            assert b1 == pytest.approx(d1, rel=1e-8)
            assert b2 == pytest.approx(d2, rel=1e-5, abs=1e-9)
            # third differences need a wide step against h^-3 roundoff
            h3 = 2e-3 * max(1.0, abs(eta))
            d3 = (float(family.cumulant(eta + 2 * h3))
                  - 2 * float(family.cumulant(eta + h3))
                  + 2 * float(family.cumulant(eta - h3))
                  - float(family.cumulant(eta - 2 * h3))) / (2 * h3 ** 3)
            assert b3 == pytest.approx(d3, rel=1e-3, abs=1e-6)

    def test_domain_rejection(self):
        for family in (GAMMA, INVERSE_GAUSSIAN):
            for eta in (0.0, 0.5):
                with pytest.raises(DomainError):
                    family.cumulant_suite(eta)
        with pytest.raises(DomainError):
            GAUSSIAN.cumulant_suite(float("nan"))

    def test_strict_convexity(self):
        for family in FAMILIES:
            for eta in ETA_GRID[family.name]:
                assert float(family.variance(eta)) > 0.0

    def test_canonical_link_inverts_mean(self):
        for family in FAMILIES:
            for eta in ETA_GRID[family.name]:
                mu = float(family.mean(eta))
                assert float(family.canonical_link(mu)) == pytest.approx(
                    eta, rel=1e-12)


class TestResponseTerms:
    def test_gaussian(self):
        scaled, unscaled = GAUSSIAN.response_terms(2.0)
        assert scaled == pytest.approx(-2.0)
        assert unscaled == pytest.approx(HALF_LOG_2PI)
        assert GAUSSIAN.in_support(2.0)

    def test_gamma_support_indicator(self):
        assert not GAMMA.in_support(-1.0)
        assert not GAMMA.in_support(0.0)
        assert GAMMA.in_support(0.5)

    def test_inverse_gaussian(self):
        scaled, unscaled = INVERSE_GAUSSIAN.response_terms(1.0)
        assert scaled == pytest.approx(-0.5)
        assert unscaled == pytest.approx(HALF_LOG_2PI)
        assert INVERSE_GAUSSIAN.in_support(1.0)


class TestNormalizerSuite:
    def test_gaussian_at_one(self):
        value, d1, d2 = GAUSSIAN.normalizer_suite(1.0)
        assert (value, d1, d2) == pytest.approx((0.0, 0.5, -0.5))

    def test_gamma_at_one(self):
        value, d1, d2 = GAMMA.normalizer_suite(1.0)
        assert value == pytest.approx(0.0, abs=1e-14)
        assert d1 == pytest.approx(1.5772156649015329, rel=1e-12)
        assert d2 == pytest.approx(-2.5094972629548393, rel=1e-12)

    def test_inverse_gaussian_at_two(self):
        value, d1, d2 = INVERSE_GAUSSIAN.normalizer_suite(2.0)
        assert (value, d1, d2) == pytest.approx(
            (0.5 * math.log(2.0), 0.25, -0.125))

    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
    @pytest.mark.parametrize("phi", [0.1, 0.5, 1.0, 2.0, 5.0])
    def test_derivatives_match_finite_differences(self, family, phi):
        value, d1, d2 = family.normalizer_suite(phi)
        h = 1e-4 * phi
        fd1, fd2 = central_diff(
            lambda t: family.normalizer_suite(t).value, phi, h)
        assert d1 == pytest.approx(fd1, rel=1e-6)
        assert d2 == pytest.approx(fd2, rel=1e-6)

    def test_rejects_nonpositive_phi(self):
        for family in FAMILIES:
            with pytest.raises(DomainError):
                family.normalizer_suite(0.0)
            with pytest.raises(DomainError):
                family.normalizer_suite(-1.0)


class TestDispersionInformation:
    def test_gaussian_at_one(self):
        assert GAUSSIAN.dispersion_information(1.0) == pytest.approx(0.5)

    def test_gamma_at_one(self):
        assert GAMMA.dispersion_information(1.0) == pytest.approx(
            PI2_6 - 1.0, rel=1e-12)

    def test_inverse_gaussian_at_two(self):
        assert INVERSE_GAUSSIAN.dispersion_information(2.0) == pytest.approx(
            0.125, rel=1e-12)

    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
    @pytest.mark.parametrize("phi", [0.1, 0.54, 1.0, 2.11])
    def test_reciprocal_parameterization_identity(self, family, phi):
        """info * phi^4 equals the curvature in the reciprocal
        parameterization (high-precision finite-difference oracle)."""
        lhs = family.dispersion_information(phi) * phi ** 4
        assert lhs == pytest.approx(mp_psi_curvature(family.name, phi),
                                    rel=1e-8)

    def test_gamma_closed_form_reduction(self):
        from glmmdisp.special import trigamma
        for phi in (0.1, 0.54, 1.0, 2.11):
            assert GAMMA.dispersion_information(phi) == pytest.approx(
                (trigamma(1.0 / phi) - phi) / phi ** 4, rel=1e-11)

    def test_gamma_small_phi_limit(self):
        phi = 0.05
        factor = 1.0 / GAMMA.dispersion_information(phi)
        assert abs(factor - 2.0 * phi ** 2) / (2.0 * phi ** 2) <= 0.02

    def test_positive_everywhere(self):
        for family in FAMILIES:
            for phi in (0.05, 0.5, 1.0, 3.0, 10.0):
                assert family.dispersion_information(phi) > 0.0


class TestDensity:
    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.name)
    def test_integrates_to_one(self, family):
        for eta in ETA_GRID[family.name]:
            for phi in (0.4, 1.0, 2.0):
                def dens(y):
                    return float(np.exp(family.log_density(y, eta, phi)))
                lo = -np.inf if family.name == "gaussian" else 0.0
                total, _ = quad(dens, lo, np.inf, epsabs=1e-12, epsrel=1e-12,
                                limit=300)
                assert total == pytest.approx(1.0, abs=1e-8)


class TestSamplers:
    @pytest.mark.parametrize("family,eta,phi", [
        (GAUSSIAN, 2.0, 1.0),
        (GAMMA, -2.0, 0.5),
        (INVERSE_GAUSSIAN, -0.5, 1.0),
    ], ids=["gaussian", "gamma", "inverse_gaussian"])
    def test_moments(self, family, eta, phi):
        rng = np.random.default_rng(99)
        draws = family.sample(np.full(100_000, eta), phi, rng)
        mean_target = float(family.mean(eta))
        var_target = phi * float(family.variance(eta))
        se_mean = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - mean_target) <= 4 * se_mean
        centered = (draws - draws.mean()) ** 2
        se_var = centered.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.var(ddof=1) - var_target) <= 4 * se_var

    def test_support(self):
        rng = np.random.default_rng(7)
        for family in (GAMMA, INVERSE_GAUSSIAN):
            draws = family.sample(np.full(1000, -1.0), 2.0, rng)
            assert np.all(draws > 0)

    def test_domain_errors(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DomainError):
            GAMMA.sample(0.5, 1.0, rng)
        with pytest.raises(DomainError):
            GAUSSIAN.sample(0.0, -1.0, rng)


class TestRegistry:
    def test_lookup(self):
        assert get_family("Gaussian") is GAUSSIAN
        assert get_family("inverse-gaussian") is INVERSE_GAUSSIAN
        assert get_family(GAMMA) is GAMMA
        with pytest.raises(ValueError):
            get_family("poisson")

    def test_normalizer_derivative_oracle_highprec(self):
        for name in ("gaussian", "gamma"):
            family = get_family(name)
            for phi in (0.3, 1.7):
                d1_mp, d2_mp = mp_normalizer_derivs(name, phi)
                _, d1, d2 = family.normalizer_suite(phi)
                assert d1 == pytest.approx(d1_mp, rel=1e-10)
                assert d2 == pytest.approx(d2_mp, rel=1e-10)
