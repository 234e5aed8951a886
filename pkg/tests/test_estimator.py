import numpy as np
import pytest
from sklearn.base import clone

from glmmdisp.estimator import GLMMRegressor


def make_problem(seed=0, m=25, n=12):
    rng = np.random.default_rng(seed)
    groups = np.repeat([f"g{i}" for i in range(m)], n)
    X = rng.normal(size=(m * n, 2))
    u = rng.normal(0, 1.0, m)
    y = 2.0 + np.repeat(u, n) + X @ np.array([1.0, -0.5]) \
        + rng.normal(0, 0.8, m * n)
    return X, y, groups


class TestFit:
    def test_basic_fit(self):
        X, y, groups = make_problem()
        est = GLMMRegressor(family="gaussian", restarts=0)
        assert est.fit(X, y, groups=groups) is est
        assert est.converged_
        assert est.params_.d_a == 1 and est.params_.d_b == 2
        assert abs(est.params_.beta_a[0] - 2.0) < 0.8
        np.testing.assert_allclose(est.params_.beta_b, [1.0, -0.5], atol=0.1)
        assert est.intervals_ is not None
        assert len(est.random_effects_) == 25

    def test_groups_required(self):
        X, y, _ = make_problem()
        with pytest.raises(ValueError, match="groups"):
            GLMMRegressor().fit(X, y)

    def test_random_columns_split(self):
        X, y, groups = make_problem()
        est = GLMMRegressor(family="gaussian", random_cols=(0,), restarts=0,
                            max_iters=400)
        est.fit(X, y, groups=groups)
        assert est.params_.d_a == 2  # intercept + column 0
        assert est.params_.d_b == 1

    def test_no_random_predictors_rejected(self):
        X, y, groups = make_problem()
        with pytest.raises(ValueError, match="random"):
            GLMMRegressor(random_intercept=False).fit(X, y, groups=groups)


class TestPredict:
    def test_group_aware_prediction_beats_population(self):
        X, y, groups = make_problem()
        est = GLMMRegressor(family="gaussian", restarts=0).fit(
            X, y, groups=groups)
        with_groups = est.predict(X, groups=groups)
        population = est.predict(X)
        sse_grouped = float(np.sum((y - with_groups) ** 2))
        sse_pop = float(np.sum((y - population) ** 2))
        assert sse_grouped < sse_pop

    def test_unknown_group_falls_back_to_population(self):
        X, y, groups = make_problem()
        est = GLMMRegressor(family="gaussian", restarts=0).fit(
            X, y, groups=groups)
        novel = est.predict(X[:5], groups=["nope"] * 5)
        np.testing.assert_allclose(novel, est.predict(X[:5]))

    def test_unfitted_raises(self):
        from sklearn.exceptions import NotFittedError
        X, y, groups = make_problem()
        with pytest.raises(NotFittedError):
            GLMMRegressor().predict(X)


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        est = GLMMRegressor(family="gamma", nodes_per_dim=31, restarts=2)
        params = est.get_params()
        assert params["family"] == "gamma"
        assert params["nodes_per_dim"] == 31
        est.set_params(restarts=0)
        assert est.restarts == 0

    def test_clone(self):
        est = GLMMRegressor(family="gamma", alpha=0.1)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_score_runs(self):
        X, y, groups = make_problem()
        est = GLMMRegressor(family="gaussian", restarts=0).fit(
            X, y, groups=groups)
        assert est.score(X, y) > 0.0
