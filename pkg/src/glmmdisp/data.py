"""Grouped datasets, model parameters and the unconstrained parameter vector.

A dataset stores observations in flat arrays sorted so each group's rows are
contiguous (first-appearance group order, original row order within groups).
Row order inside a group is preserved for reproducibility but carries no
meaning: the likelihood is invariant to it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import SchemaError


class Group(NamedTuple):
    label: object
    y: np.ndarray
    xa: np.ndarray
    xb: np.ndarray


class Dataset:
    """Grouped observations with random-effect and fixed-only predictors.

    Parameters
    ----------
    group : sequence of hashable labels, one per observation.
    y : response vector.
    xa : predictors partnered by a random effect, shape (n_obs, d_a).
    xb : fixed-only predictors, shape (n_obs, d_b); may be None for d_b = 0.
    """

    def __init__(self, group: Sequence, y, xa, xb=None):
        y = np.asarray(y, dtype=float).ravel()
        xa = np.atleast_2d(np.asarray(xa, dtype=float))
        if xa.shape[0] != y.size:
            xa = xa.T
        if xb is None:
            xb = np.empty((y.size, 0))
        else:
            xb = np.atleast_2d(np.asarray(xb, dtype=float))
            if xb.shape[0] != y.size and xb.size > 0:
                xb = xb.T
        group = list(group)
        if not (len(group) == y.size == xa.shape[0] == xb.shape[0]):
            raise ValueError("group, y, xa and xb must have matching lengths")
        if xa.shape[1] < 1:
            raise ValueError("at least one random-effect predictor is required")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(xa))
                and np.all(np.isfinite(xb))):
            raise ValueError("all numeric entries must be finite")

        # Stable sort into first-appearance group order, contiguous per group.
        labels: list = []
        index_of: dict = {}
        gidx = np.empty(y.size, dtype=np.int64)
        for row, lab in enumerate(group):
            if lab not in index_of:
                index_of[lab] = len(labels)
                labels.append(lab)
            gidx[row] = index_of[lab]
        order = np.argsort(gidx, kind="stable")

        self.labels = labels
        self.y = np.ascontiguousarray(y[order])
        self.xa = np.ascontiguousarray(xa[order])
        self.xb = np.ascontiguousarray(xb[order])
        self.group_index = np.ascontiguousarray(gidx[order])
        self.group_sizes = np.bincount(self.group_index, minlength=len(labels))
        self.starts = np.concatenate(([0], np.cumsum(self.group_sizes)))
        if len(labels) < 2:
            raise ValueError("a dataset needs at least two groups")
        self._cache: dict = {}

    # -- basic shape -----------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def n_bar(self) -> float:
        """Average within-group sample size."""
        return self.n_obs / self.m

    @property
    def d_a(self) -> int:
        return self.xa.shape[1]

    @property
    def d_b(self) -> int:
        return self.xb.shape[1]

    def groups(self) -> Iterator[Group]:
        for i in range(self.m):
            s, e = self.starts[i], self.starts[i + 1]
            yield Group(self.labels[i], self.y[s:e], self.xa[s:e], self.xb[s:e])

    def group_rows(self, i: int) -> slice:
        return slice(int(self.starts[i]), int(self.starts[i + 1]))

    # -- cached per-group sufficient statistics ---------------------------

    @property
    def group_yxa(self) -> np.ndarray:
        """Per-group sums of ``y * xa``, shape (m, d_a)."""
        key = "group_yxa"
        if key not in self._cache:
            self._cache[key] = np.add.reduceat(self.y[:, None] * self.xa,
                                               self.starts[:-1], axis=0)
        return self._cache[key]

    def response_term_sums(self, family) -> tuple[float, float]:
        """Dataset totals of the scaled and unscaled response offset terms."""
        key = ("terms", family.name)
        if key not in self._cache:
            scaled, unscaled = family.response_terms(self.y)
            self._cache[key] = (float(np.sum(scaled)), float(np.sum(unscaled)))
        return self._cache[key]

    def __repr__(self) -> str:
        return (f"Dataset(m={self.m}, n_obs={self.n_obs}, d_a={self.d_a}, "
                f"d_b={self.d_b})")


@dataclass(frozen=True, eq=False)
class Parameters:
    """Model parameters: fixed effects, random-effect covariance, dispersion."""

    beta_a: np.ndarray
    beta_b: np.ndarray
    sigma: np.ndarray
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "beta_a",
                           np.atleast_1d(np.asarray(self.beta_a, dtype=float)))
        object.__setattr__(self, "beta_b",
                           np.asarray(self.beta_b, dtype=float).reshape(-1))
        object.__setattr__(self, "sigma",
                           np.atleast_2d(np.asarray(self.sigma, dtype=float)))
        object.__setattr__(self, "phi", float(self.phi))
        d_a = self.beta_a.size
        if self.sigma.shape != (d_a, d_a):
            raise ValueError(
                f"sigma must be {d_a}x{d_a}, got {self.sigma.shape}")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        if not (self.phi > 0.0 and math.isfinite(self.phi)):
            raise ValueError(f"phi must be positive and finite, got {self.phi}")
        if not (np.all(np.isfinite(self.beta_a)) and np.all(np.isfinite(self.beta_b))
                and np.all(np.isfinite(self.sigma))):
            raise ValueError("parameters must be finite")

    @property
    def d_a(self) -> int:
        return self.beta_a.size

    @property
    def d_b(self) -> int:
        return self.beta_b.size

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError:
            raise ValueError("sigma is not positive definite") from None


def n_unconstrained(d_a: int, d_b: int) -> int:
    return d_a + d_b + d_a * (d_a + 1) // 2 + 1


def to_unconstrained(p: Parameters) -> np.ndarray:
    """Pack parameters into a free real vector.

    The covariance is encoded through its lower Cholesky factor with logged
    diagonal (column-major lower-triangle order); the dispersion as its log.
    """
    chol = p.cholesky()
    d_a = p.d_a
    tri = []
    for j in range(d_a):
        tri.append(math.log(chol[j, j]))
        tri.extend(chol[j + 1:, j])
    return np.concatenate([p.beta_a, p.beta_b, tri, [math.log(p.phi)]])


def from_unconstrained(theta: np.ndarray, d_a: int, d_b: int) -> Parameters:
    """Inverse of :func:`to_unconstrained`."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != n_unconstrained(d_a, d_b):
        raise ValueError(
            f"expected vector of length {n_unconstrained(d_a, d_b)}, "
            f"got {theta.size}")
    beta_a = theta[:d_a]
    beta_b = theta[d_a:d_a + d_b]
    chol = np.zeros((d_a, d_a))
    pos = d_a + d_b
    for j in range(d_a):
        chol[j, j] = math.exp(theta[pos])
        pos += 1
        k = d_a - j - 1
        chol[j + 1:, j] = theta[pos:pos + k]
        pos += k
    sigma = chol @ chol.T
    return Parameters(beta_a, beta_b, sigma, math.exp(theta[pos]))


@dataclass
class CsvSchema:
    """Column mapping for grouped-data CSV files."""

    group_col: str
    y_col: str
    xa_cols: list = field(default_factory=list)
    xb_cols: list = field(default_factory=list)
    xa_intercept: bool = False
    xb_intercept: bool = False
    delimiter: str = ","


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a grouped dataset from a delimited text file with a header row.

    Groups follow first appearance in the file and keep their row order.
    Synthetic intercept columns are prepended when the schema flags ask
    for them.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        col = {name: i for i, name in enumerate(header)}
        needed = [schema.group_col, schema.y_col, *schema.xa_cols, *schema.xb_cols]
        for name in needed:
            if name not in col:
                raise SchemaError(f"{path}: missing column {name!r}")

        groups, ys, xas, xbs = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise SchemaError(f"{path}: row {lineno} has too few fields")

            def cell(name):
                raw = row[col[name]].strip()
                try:
                    return float(raw)
                except ValueError:
                    raise SchemaError(
                        f"{path}: non-numeric value {raw!r} in column "
                        f"{name!r} at row {lineno}") from None

            groups.append(row[col[schema.group_col]].strip())
            ys.append(cell(schema.y_col))
            xas.append([cell(c) for c in schema.xa_cols])
            xbs.append([cell(c) for c in schema.xb_cols])

    if not ys:
        raise SchemaError(f"{path}: no data rows")
    xa = np.asarray(xas, dtype=float).reshape(len(ys), len(schema.xa_cols))
    xb = np.asarray(xbs, dtype=float).reshape(len(ys), len(schema.xb_cols))
    if schema.xa_intercept:
        xa = np.column_stack([np.ones(len(ys)), xa])
    if schema.xb_intercept:
        xb = np.column_stack([np.ones(len(ys)), xb])
    if xa.shape[1] == 0:
        raise SchemaError(
            f"{path}: schema defines no random-effect predictors "
            f"(set xa_cols or xa_intercept)")
    return Dataset(groups, ys, xa, xb)


def save_csv(ds: Dataset, path, schema: CsvSchema) -> None:
    """Write a dataset using the schema's column names.

    Synthetic intercept flags must be off: every column is written verbatim.
    """
    if schema.xa_intercept or schema.xb_intercept:
        raise SchemaError("save_csv writes explicit columns only; "
                          "disable intercept flags")
    if len(schema.xa_cols) != ds.d_a or len(schema.xb_cols) != ds.d_b:
        raise SchemaError("schema column counts do not match the dataset")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter)
        writer.writerow([schema.group_col, schema.y_col,
                         *schema.xa_cols, *schema.xb_cols])
        for i in range(ds.n_obs):
            writer.writerow([ds.labels[ds.group_index[i]],
                             repr(float(ds.y[i])),
                             *[repr(float(v)) for v in ds.xa[i]],
                             *[repr(float(v)) for v in ds.xb[i]]])
