"""Command-line interface: fit, simulate, coverage, validate.

Exit codes: 0 success, 1 I/O or schema problems, 2 domain or precondition
violations, 3 fit non-convergence (outputs are still written).  Every
command honors ``--seed`` for bit-identical outputs, and ``--config`` may
supply any option from a JSON file (explicit flags win).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .data import CsvSchema, load_csv
from .errors import ConvergenceError, DomainError, GlmmError, SchemaError
from .families import get_family
from .fitting import FitOptions, fit_mle
from .inference import asymptotic_covariance, confidence_table
from .quadrature import QuadratureSpec
from .sim import (SETTINGS, generate_dataset, get_setting, run_coverage,
                  validate_asymptotics)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_NOCONV = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glmmdisp",
        description="Mixed-model maximum likelihood with dispersion "
                    "inference and simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with option values "
                                        "(explicit flags win)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: machine parallelism "
                            "or GLMMD_THREADS)")

    p_fit = sub.add_parser("fit", help="fit a CSV dataset")
    common(p_fit)
    p_fit.add_argument("--csv", required=True)
    p_fit.add_argument("--family", default=None)
    p_fit.add_argument("--group-col", default=None)
    p_fit.add_argument("--y-col", default=None)
    p_fit.add_argument("--xa-cols", default=None,
                       help="comma-separated random-effect predictor columns")
    p_fit.add_argument("--xb-cols", default=None,
                       help="comma-separated fixed-only predictor columns")
    p_fit.add_argument("--xa-intercept", action="store_true", default=None)
    p_fit.add_argument("--xb-intercept", action="store_true", default=None)
    p_fit.add_argument("--delimiter", default=None)
    p_fit.add_argument("--alpha", type=float, default=None)
    p_fit.add_argument("--nodes", type=int, default=None)
    p_fit.add_argument("--max-iters", type=int, default=None)
    p_fit.add_argument("--restarts", type=int, default=None)
    p_fit.add_argument("--sd-method", choices=["delta", "transform"],
                       default=None)
    p_fit.add_argument("--out-json", default=None)
    p_fit.add_argument("--out-csv", default=None)

    p_sim = sub.add_parser("simulate", help="emit a generated dataset CSV")
    common(p_sim)
    p_sim.add_argument("--setting", default=None,
                       help=f"one of {sorted(SETTINGS)}")
    p_sim.add_argument("--m", type=int, default=None)
    p_sim.add_argument("--n", type=int, default=None,
                       help="per-group size (default m/5)")
    p_sim.add_argument("--out-csv", default=None)
    p_sim.add_argument("--out-json", default=None)

    p_cov = sub.add_parser("coverage", help="run the coverage study")
    common(p_cov)
    p_cov.add_argument("--settings", default=None,
                       help="comma-separated labels (default A,B,C,D)")
    p_cov.add_argument("--setting", default=None, help="single label")
    p_cov.add_argument("--m-grid", default=None,
                       help="comma-separated group counts "
                            "(default 50,100,150,200)")
    p_cov.add_argument("--m", type=int, default=None, help="single m value")
    p_cov.add_argument("--reps", type=int, default=None)
    p_cov.add_argument("--alpha", type=float, default=None)
    p_cov.add_argument("--nodes", type=int, default=None)
    p_cov.add_argument("--max-iters", type=int, default=None)
    p_cov.add_argument("--restarts", type=int, default=None)
    p_cov.add_argument("--out-csv", default=None)
    p_cov.add_argument("--out-meta", default=None)

    p_val = sub.add_parser("validate",
                           help="validate the asymptotic covariance claims")
    common(p_val)
    p_val.add_argument("--setting", default=None)
    p_val.add_argument("--m", type=int, default=None)
    p_val.add_argument("--n", type=int, default=None)
    p_val.add_argument("--reps", type=int, default=None)
    p_val.add_argument("--nodes", type=int, default=None)
    p_val.add_argument("--restarts", type=int, default=None)
    p_val.add_argument("--out-json", default=None)
    return parser


class _Config:
    """Flag > config-file > built-in default resolution."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file: dict = {}
        if self.args.get("config"):
            with open(self.args["config"], encoding="utf-8") as fh:
                self.file = json.load(fh)

    def get(self, name: str, default=None):
        flag = self.args.get(name)
        if flag is not None:
            return flag
        key = name
        if key in self.file and self.file[key] is not None:
            return self.file[key]
        return default


def _split_list(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _fit_options(cfg: _Config) -> FitOptions:
    return FitOptions(
        max_iters=int(cfg.get("max_iters", 5000)),
        restarts=int(cfg.get("restarts", 1)),
        seed=int(cfg.get("seed", 0)),
        quadrature=QuadratureSpec(nodes_per_dim=int(cfg.get("nodes", 21))))


def _cov_to_json(cov) -> dict:
    def block(a):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        return {"dims": list(a.shape), "data": [float(v) for v in a.ravel()]}
    return {"beta_a": block(cov.beta_a), "beta_b": block(cov.beta_b),
            "vech_sigma": block(cov.vech_sigma), "phi_var": cov.phi_var}


def cmd_fit(cfg: _Config) -> int:
    schema = CsvSchema(
        group_col=cfg.get("group_col", "group"),
        y_col=cfg.get("y_col", "y"),
        xa_cols=_split_list(cfg.get("xa_cols", "") or ""),
        xb_cols=_split_list(cfg.get("xb_cols", "") or ""),
        xa_intercept=bool(cfg.get("xa_intercept", False)),
        xb_intercept=bool(cfg.get("xb_intercept", False)),
        delimiter=cfg.get("delimiter", ","))
    family = get_family(cfg.get("family", "gaussian"))
    alpha = float(cfg.get("alpha", 0.05))
    opts = _fit_options(cfg)

    ds = load_csv(cfg.get("csv"), schema)
    fit = fit_mle(ds, family, opts)
    fit.asym_cov = asymptotic_covariance(ds, fit.params, family,
                                         on_singular="skip")
    table = confidence_table(fit, ds, family, alpha,
                             sd_method=cfg.get("sd_method", "delta"),
                             allow_unconverged=True)

    out = {
        "schema_version": SCHEMA_VERSION,
        "family": family.name,
        "estimates": {
            "beta_a": [float(v) for v in fit.params.beta_a],
            "beta_b": [float(v) for v in fit.params.beta_b],
            "sigma": [[float(v) for v in row] for row in fit.params.sigma],
            "phi": fit.params.phi,
        },
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iters": fit.iters,
        "asym_cov": _cov_to_json(fit.asym_cov),
        "options": {"max_iters": opts.max_iters, "tol_f": opts.tol_f,
                    "tol_x": opts.tol_x, "restarts": opts.restarts,
                    "nodes_per_dim": opts.quadrature.nodes_per_dim,
                    "adaptive": opts.quadrature.adaptive},
        "seed": int(cfg.get("seed", 0)),
        "alpha": alpha,
    }
    with open(cfg.get("out_json", "fit_result.json"), "w",
              encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    table.to_csv(cfg.get("out_csv", "fit_cis.csv"))

    print(f"m = {ds.m} groups, {ds.n_obs} observations, "
          f"family = {family.name}")
    print(f"log-likelihood = {fit.loglik:.6f}  "
          f"(converged = {fit.converged}, iterations = {fit.iters})")
    print(table.to_text())
    return EXIT_OK if fit.converged else EXIT_NOCONV


def cmd_simulate(cfg: _Config) -> int:
    setting = get_setting(cfg.get("setting", "A"))
    m = int(cfg.get("m", 50))
    n = int(cfg.get("n") or max(1, m // 5))
    seed = int(cfg.get("seed", 0))
    data = generate_dataset(setting, m, n, seed=seed)
    ds = data.dataset

    out_csv = cfg.get("out_csv", "dataset.csv")
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        xb_names = [f"x_b{k + 1}" for k in range(ds.d_b)]
        writer.writerow(["group", "y", *xb_names])
        for i in range(ds.n_obs):
            writer.writerow([ds.labels[ds.group_index[i]],
                             f"{ds.y[i]:.17g}",
                             *[f"{v:.17g}" for v in ds.xb[i]]])

    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "setting": setting.label,
        "family": setting.family,
        "true_params": {"beta_a": [setting.beta0],
                        "beta_b": list(setting.beta_b),
                        "sigma": [[setting.sigma2]],
                        "phi": setting.phi},
        "m": m, "n": n, "seed": seed, "redraws": data.redraws,
    }
    with open(cfg.get("out_json", "dataset_truth.json"), "w",
              encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {ds.n_obs} rows ({m} groups) to {out_csv}")
    return EXIT_OK


def cmd_coverage(cfg: _Config) -> int:
    labels = cfg.get("setting") or cfg.get("settings", "A,B,C,D")
    settings = [get_setting(s) for s in _split_list(labels)]
    if cfg.get("m") is not None:
        m_grid = [int(cfg.get("m"))]
    else:
        m_grid = [int(v) for v in _split_list(cfg.get("m_grid", "50,100,150,200"))]
    reps = int(cfg.get("reps", 200))
    alpha = float(cfg.get("alpha", 0.05))
    seed = int(cfg.get("seed", 0))
    opts = _fit_options(cfg)
    threads = cfg.get("threads")

    report = run_coverage(settings, m_grid, reps, alpha=alpha, seed=seed,
                          opts=opts, threads=threads)
    report.to_csv(cfg.get("out_csv", "coverage.csv"))
    with open(cfg.get("out_meta", "coverage_meta.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for row in report.rows:
        print(f"setting {row.setting} m={row.m:4d} n={row.n:3d}  "
              f"coverage {row.coverage:.3f} (mc se {row.mc_se:.4f}, "
              f"failures {row.fit_failures})")
    return EXIT_OK


def cmd_validate(cfg: _Config) -> int:
    setting = get_setting(cfg.get("setting", "A"))
    m = int(cfg.get("m", 200))
    n = int(cfg.get("n") or max(1, m // 5))
    reps = int(cfg.get("reps", 300))
    seed = int(cfg.get("seed", 0))
    opts = _fit_options(cfg)
    report = validate_asymptotics(setting, m, n, reps, seed=seed, opts=opts,
                                  threads=cfg.get("threads"))
    with open(cfg.get("out_json", "validation.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"setting {report.setting} m={report.m} n={report.n}: "
          f"dispersion variance empirical {report.phi_variance_empirical:.4f} "
          f"vs predicted {report.phi_variance_predicted:.4f} "
          f"(rel dev {report.phi_variance_rel_dev:.3f})")
    worst = max(report.phi_cross_z.values(), key=abs)
    print(f"largest dispersion cross z-score: {worst:.2f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _Config(args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    handlers = {"fit": cmd_fit, "simulate": cmd_simulate,
                "coverage": cmd_coverage, "validate": cmd_validate}
    try:
        return handlers[args.command](cfg)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DomainError, ConvergenceError, GlmmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
