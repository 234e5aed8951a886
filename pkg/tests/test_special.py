import math

import numpy as np
import pytest

from glmmdisp.special import digamma, normal_cdf, normal_quantile, trigamma

from conftest import trigamma_series

PI2_6 = math.pi ** 2 / 6.0
PI2_2 = math.pi ** 2 / 2.0


class TestTrigamma:
    def test_known_values(self):
        assert trigamma(1.0) == pytest.approx(PI2_6, rel=1e-12)
        assert trigamma(0.5) == pytest.approx(PI2_2, rel=1e-12)

    @pytest.mark.parametrize("x", [0.5, 1.0, 3.7, 15.0])
    def test_against_series_oracle(self, x):
        assert trigamma(x) == pytest.approx(trigamma_series(x), rel=1e-12)

    @pytest.mark.parametrize("x", [0.3, 1.7, 9.2])
    def test_defining_recurrence(self, x):
        assert trigamma(x) - trigamma(x + 1.0) == pytest.approx(
            1.0 / (x * x), rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            trigamma(0.0)
        with pytest.raises(ValueError):
            trigamma(-2.0)


class TestDigamma:
    def test_euler_mascheroni(self):
        assert digamma(1.0) == pytest.approx(-0.5772156649015329, rel=1e-12)

    @pytest.mark.parametrize("x", [0.25, 1.0, 2.5, 7.0, 30.0])
    def test_against_mpmath(self, x):
        mp = pytest.importorskip("mpmath")
        assert digamma(x) == pytest.approx(float(mp.digamma(x)), rel=1e-12)

    @pytest.mark.parametrize("x", [0.3, 1.7, 9.2])
    def test_defining_recurrence(self, x):
        assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x,
                                                              rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            digamma(-1.0)


class TestNormalQuantile:
    def test_round_trip(self):
        for p in (0.5, 0.9, 0.975, 0.995):
            assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10

    def test_central_value(self):
        assert normal_quantile(0.5) == 0.0
        assert normal_quantile(0.975) == pytest.approx(1.959963984540054,
                                                       abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for p in rng.uniform(1e-6, 1 - 1e-6, size=50):
            assert normal_quantile(p) == pytest.approx(
                -normal_quantile(1.0 - p), abs=1e-9)

    def test_bounds(self):
        assert normal_quantile(0.0) == -math.inf
        assert normal_quantile(1.0) == math.inf
        with pytest.raises(ValueError):
            normal_quantile(1.5)
