"""Conditional maximum likelihood for mixed models over exponential
dispersion families, including dispersion-parameter inference and a
Monte Carlo coverage harness."""

from .data import (CsvSchema, Dataset, Parameters, from_unconstrained,
                   load_csv, save_csv, to_unconstrained)
from .errors import ConvergenceError, DomainError, GlmmError, SchemaError
from .estimator import GLMMRegressor
from .families import (GAMMA, GAUSSIAN, INVERSE_GAUSSIAN, Family, Gamma,
                       Gaussian, InverseGaussian, get_family)
from .fitting import (FitOptions, FitResult, fit_mle, pearson_dispersion,
                      starting_values)
from .inference import (AsymptoticCovariance, CiRow, CiTable, Interval,
                        asymptotic_covariance, confidence_table,
                        dispersion_interval, dispersion_interval_general,
                        fixed_only_covariance_scale)
from .likelihood import (PosteriorMode, gaussian_marginal_loglik,
                         group_posterior_mode, linear_predictor,
                         log_likelihood, posterior_modes)
from .matrixops import duplication_matrix, duplication_pinv, unvech, vech
from .neldermead import NMResult, nelder_mead
from .quadrature import QuadratureSpec, gauss_hermite
from .sim import (SETTINGS, CoverageReport, SimSetting, ValidationReport,
                  generate_dataset, get_setting, run_coverage,
                  validate_asymptotics)
from .special import digamma, normal_cdf, normal_quantile, trigamma

__version__ = "0.1.0"

__all__ = [
    "CsvSchema", "Dataset", "Parameters", "from_unconstrained", "load_csv",
    "save_csv", "to_unconstrained",
    "ConvergenceError", "DomainError", "GlmmError", "SchemaError",
    "GLMMRegressor",
    "GAMMA", "GAUSSIAN", "INVERSE_GAUSSIAN", "Family", "Gamma", "Gaussian",
    "InverseGaussian", "get_family",
    "FitOptions", "FitResult", "fit_mle", "pearson_dispersion",
    "starting_values",
    "AsymptoticCovariance", "CiRow", "CiTable", "Interval",
    "asymptotic_covariance", "confidence_table", "dispersion_interval",
    "dispersion_interval_general", "fixed_only_covariance_scale",
    "PosteriorMode", "gaussian_marginal_loglik", "group_posterior_mode",
    "linear_predictor", "log_likelihood", "posterior_modes",
    "duplication_matrix", "duplication_pinv", "unvech", "vech",
    "NMResult", "nelder_mead",
    "QuadratureSpec", "gauss_hermite",
    "SETTINGS", "CoverageReport", "SimSetting", "ValidationReport",
    "generate_dataset", "get_setting", "run_coverage",
    "validate_asymptotics",
    "digamma", "normal_cdf", "normal_quantile", "trigamma",
    "__version__",
]
