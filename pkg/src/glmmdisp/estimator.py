"""Scikit-learn compatible estimator around the mixed-model fit.

The estimator splits the feature matrix into predictors partnered by a
group-level random effect and fixed-only predictors, fits by conditional
maximum likelihood, and predicts mean responses using the posterior-mode
random effect of groups seen during training (zero for new groups).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset
from .families import get_family
from .fitting import FitOptions, fit_mle
from .inference import asymptotic_covariance, confidence_table
from .likelihood import posterior_modes
from .quadrature import QuadratureSpec


class GLMMRegressor(BaseEstimator, RegressorMixin):
    """Mixed-model regression over an exponential dispersion family.

    Parameters
    ----------
    family : str, default "gaussian"
        One of "gaussian", "gamma", "inverse_gaussian".
    random_cols : tuple of int, default ()
        Feature columns partnered by the group-level random effect.
    random_intercept : bool, default True
        Prepend a constant random-effect predictor (random intercept).
    fixed_intercept : bool, default False
        Prepend a constant fixed-only predictor.
    nodes_per_dim, adaptive
        Quadrature configuration for non-Gaussian families.
    max_iters, tol_f, tol_x, restarts, seed
        Simplex search configuration.

    Attributes set by :meth:`fit` carry a trailing underscore; the full
    machine-readable result lives in ``result_`` and the interval table in
    ``intervals_``.
    """

    def __init__(self, family="gaussian", random_cols=(),
                 random_intercept=True, fixed_intercept=False,
                 alpha=0.05, nodes_per_dim=21, adaptive=True,
                 max_iters=5000, tol_f=1e-9, tol_x=1e-7, restarts=1,
                 seed=0):
        self.family = family
        self.random_cols = random_cols
        self.random_intercept = random_intercept
        self.fixed_intercept = fixed_intercept
        self.alpha = alpha
        self.nodes_per_dim = nodes_per_dim
        self.adaptive = adaptive
        self.max_iters = max_iters
        self.tol_f = tol_f
        self.tol_x = tol_x
        self.restarts = restarts
        self.seed = seed

    def _split(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rand = list(self.random_cols)
        fixed = [j for j in range(X.shape[1]) if j not in rand]
        xa = X[:, rand] if rand else np.empty((X.shape[0], 0))
        xb = X[:, fixed] if fixed else np.empty((X.shape[0], 0))
        if self.random_intercept:
            xa = np.column_stack([np.ones(X.shape[0]), xa])
        if self.fixed_intercept:
            xb = np.column_stack([np.ones(X.shape[0]), xb])
        if xa.shape[1] == 0:
            raise ValueError("no random-effect predictors: set random_cols "
                             "or random_intercept")
        return xa, xb

    def fit(self, X, y, groups=None):
        """Fit the model to grouped data.

        ``groups`` is required: one hashable label per sample.
        """
        X, y = check_X_y(X, y, y_numeric=True)
        if groups is None:
            raise ValueError("groups is required: one label per sample")
        groups = np.asarray(groups)
        if groups.shape[0] != X.shape[0]:
            raise ValueError("groups length does not match X")
        xa, xb = self._split(X)
        ds = Dataset(groups.tolist(), y, xa, xb)
        opts = FitOptions(
            max_iters=self.max_iters, tol_f=self.tol_f, tol_x=self.tol_x,
            restarts=self.restarts, seed=self.seed,
            quadrature=QuadratureSpec(nodes_per_dim=self.nodes_per_dim,
                                      adaptive=self.adaptive))
        family = get_family(self.family)
        result = fit_mle(ds, family, opts)
        result.asym_cov = asymptotic_covariance(ds, result.params, family)

        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.params_ = result.params
        self.loglik_ = result.loglik
        self.converged_ = result.converged
        self.n_iter_ = result.iters
        self.asym_cov_ = result.asym_cov
        self.intervals_ = (confidence_table(result, ds, family, self.alpha)
                           if result.converged else None)
        modes, _ = posterior_modes(result.params, ds, family)
        self.random_effects_ = dict(zip(ds.labels, modes))
        return self

    def predict(self, X, groups=None):
        """Mean response; uses fitted random effects for known groups."""
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count differs from fit time")
        xa, xb = self._split(X)
        p = self.params_
        eta = xa @ p.beta_a
        if p.d_b:
            eta = eta + xb @ p.beta_b
        if groups is not None:
            groups = np.asarray(groups)
            u = np.zeros((X.shape[0], p.d_a))
            for row, label in enumerate(groups):
                if label in self.random_effects_:
                    u[row] = self.random_effects_[label]
            eta = eta + np.sum(xa * u, axis=1)
        family = get_family(self.family)
        family.require_natural(eta)
        return family.mean(eta)
