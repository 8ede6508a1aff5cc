"""Dataset containers, CSV ingestion, splitting, and the synthetic generator.

The canonical CSV layout is UTF-8, comma-separated, one header row, decimal
points, no thousands separators.  Covariates are every column not claimed by
a role; ground-truth columns, when present, are named ``mu0``, ``mu1`` and
``p_true``.  Missing values (empty fields) are rejected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateFold,
    InvalidSpec,
    LengthMismatch,
    MissingColumn,
    NonBinaryTreatment,
    NonFiniteValue,
    TooFewUnits,
    ValidationError,
)

GROUND_TRUTH_COLUMNS = ("mu0", "mu1", "p_true")

FOLD_REDRAW_LIMIT = 100


def _freeze(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """An observational sample: covariates ``x``, binary treatment ``t``, outcome ``y``.

    Arrays are validated and frozen at construction: shared n across fields,
    n >= 2, d >= 1, t in {0, 1}, and no NaN/Inf anywhere.
    """

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        t = np.asarray(self.t)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValidationError("covariates must be a 2-d matrix")
        if x.shape[1] < 1:
            raise ValidationError("covariate matrix needs at least one column")
        if t.shape != (x.shape[0],) or y.shape != (x.shape[0],):
            raise LengthMismatch("x, t, y must share the same number of rows")
        if x.shape[0] < 2:
            raise TooFewUnits("a dataset needs at least two units")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise ValidationError("covariates and outcomes must be finite")
        tf = t.astype(np.float64)
        if not np.isin(tf, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(tf, (0.0, 1.0)))[0])
            raise NonBinaryTreatment(bad, t[bad])
        object.__setattr__(self, "x", _freeze(x))
        object.__setattr__(self, "t", _freeze(tf.astype(np.int64)))
        object.__setattr__(self, "y", _freeze(y.copy()))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.x[idx], self.t[idx], self.y[idx])


@dataclass(frozen=True)
class GroundTruth:
    """True outcome surfaces and, when known, the true treatment probability.

    ``p_true`` is optional because converted benchmark data (factual plus
    counterfactual outcomes) usually carries no assignment probabilities.
    When present it must be strictly inside (0, 1).
    """

    mu0: np.ndarray
    mu1: np.ndarray
    p_true: np.ndarray | None = None

    def __post_init__(self):
        mu0 = np.asarray(self.mu0, dtype=np.float64)
        mu1 = np.asarray(self.mu1, dtype=np.float64)
        if mu0.shape != mu1.shape or mu0.ndim != 1:
            raise LengthMismatch("mu0 and mu1 must be 1-d vectors of equal length")
        if not np.isfinite(mu0).all() or not np.isfinite(mu1).all():
            raise ValidationError("ground-truth outcome surfaces must be finite")
        object.__setattr__(self, "mu0", _freeze(mu0.copy()))
        object.__setattr__(self, "mu1", _freeze(mu1.copy()))
        if self.p_true is not None:
            p = np.asarray(self.p_true, dtype=np.float64)
            if p.shape != mu0.shape:
                raise LengthMismatch("p_true must match mu0/mu1 in length")
            if not ((p > 0.0) & (p < 1.0)).all():
                raise ValidationError("p_true must lie strictly inside (0, 1)")
            object.__setattr__(self, "p_true", _freeze(p.copy()))

    def subset(self, idx) -> "GroundTruth":
        idx = np.asarray(idx)
        p = None if self.p_true is None else self.p_true[idx]
        return GroundTruth(self.mu0[idx], self.mu1[idx], p)

    def ate(self) -> float:
        """Sample mean of mu1 - mu0 (treated minus control)."""
        return float(np.mean(self.mu1 - self.mu0))


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of unit indices into k folds, each holding both arms."""

    fold_of: np.ndarray
    k: int

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=np.int64)
        if self.k < 2:
            raise ValidationError("k must be at least 2")
        if fold_of.min() < 0 or fold_of.max() >= self.k:
            raise ValidationError("fold labels must lie in [0, k)")
        if len(np.unique(fold_of)) != self.k:
            raise DegenerateFold("every fold must be non-empty")
        object.__setattr__(self, "fold_of", _freeze(fold_of.copy()))

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def complement(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------


def load_csv(
    path,
    t_col: str = "t",
    y_col: str = "y",
    covariate_cols: Sequence[str] | None = None,
) -> tuple[Dataset, GroundTruth | None]:
    """Read a dataset from the canonical CSV layout.

    Parameters
    ----------
    path : file path.
    t_col, y_col : names of the treatment and outcome columns.
    covariate_cols : explicit covariate column names; by default every
        column that is not a role column (treatment, outcome, ground truth)
        is a covariate, in header order.

    Returns
    -------
    (Dataset, GroundTruth or None).  Ground truth is attached when the
    ``mu0`` and ``mu1`` columns are both present (``p_true`` additionally
    when present).

    Raises
    ------
    MissingColumn, NonBinaryTreatment, NonFiniteValue.  Row indices in
    errors are 0-based over data rows (the header is not counted).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(t_col) from None
        rows = list(reader)

    col_of = {name: i for i, name in enumerate(header)}
    for required in (t_col, y_col):
        if required not in col_of:
            raise MissingColumn(required)

    has_mu = "mu0" in col_of and "mu1" in col_of
    has_p = "p_true" in col_of
    role_cols = {t_col, y_col} | set(GROUND_TRUTH_COLUMNS)
    if covariate_cols is None:
        covariate_cols = [c for c in header if c not in role_cols]
    else:
        for c in covariate_cols:
            if c not in col_of:
                raise MissingColumn(c)
    if not covariate_cols:
        raise MissingColumn("<covariates>")

    def parse(row_idx, row, name):
        raw = row[col_of[name]].strip() if col_of[name] < len(row) else ""
        if not raw:
            raise NonFiniteValue(row_idx, name, raw)
        try:
            value = float(raw)
        except ValueError:
            raise NonFiniteValue(row_idx, name, raw) from None
        if not math.isfinite(value):
            raise NonFiniteValue(row_idx, name, raw)
        return value

    n = len(rows)
    x = np.empty((n, len(covariate_cols)))
    t = np.empty(n)
    y = np.empty(n)
    mu0 = np.empty(n) if has_mu else None
    mu1 = np.empty(n) if has_mu else None
    p_true = np.empty(n) if has_p else None
    for i, row in enumerate(rows):
        tv = parse(i, row, t_col)
        if tv not in (0.0, 1.0):
            raise NonBinaryTreatment(i, tv)
        t[i] = tv
        y[i] = parse(i, row, y_col)
        for j, c in enumerate(covariate_cols):
            x[i, j] = parse(i, row, c)
        if has_mu:
            mu0[i] = parse(i, row, "mu0")
            mu1[i] = parse(i, row, "mu1")
        if has_p:
            p_true[i] = parse(i, row, "p_true")

    ds = Dataset(x, t, y)
    gt = GroundTruth(mu0, mu1, p_true) if has_mu else None
    return ds, gt


def write_csv(path, ds: Dataset, gt: GroundTruth | None = None,
              covariate_names: Sequence[str] | None = None) -> None:
    """Write a dataset (and optional ground truth) in the canonical layout.

    Floats are written with shortest exact round-trip formatting, so
    load_csv(write_csv(ds)) reproduces every value bit-for-bit.
    """
    if covariate_names is None:
        covariate_names = [f"x{j + 1}" for j in range(ds.d)]
    header = list(covariate_names) + ["t", "y"]
    if gt is not None:
        header += ["mu0", "mu1"]
        if gt.p_true is not None:
            header.append("p_true")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.x[i]]
            row.append(str(int(ds.t[i])))
            row.append(repr(float(ds.y[i])))
            if gt is not None:
                row += [repr(float(gt.mu0[i])), repr(float(gt.mu1[i]))]
                if gt.p_true is not None:
                    row.append(repr(float(gt.p_true[i])))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Synthetic data-generating process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """A data-generating process with known potential-outcome surfaces.

    ``propensity``, ``mu0`` and ``mu1`` map an (n, d) covariate matrix to
    length-n vectors.  Covariates are drawn i.i.d. standard normal.
    """

    d: int
    propensity: Callable[[np.ndarray], np.ndarray]
    mu0: Callable[[np.ndarray], np.ndarray]
    mu1: Callable[[np.ndarray], np.ndarray]
    sigma: float = 0.1
    name: str = "custom"

    def __post_init__(self):
        if self.d < 1:
            raise InvalidSpec("d must be at least 1")
        if self.sigma < 0:
            raise InvalidSpec("noise scale must be non-negative")

    @staticmethod
    def default(sigma: float = 0.1) -> "SyntheticSpec":
        """Nonlinear six-covariate benchmark process.

        Treatment probability
        sigmoid(0.8*x1 - 0.3*x2 + 0.2*x1*x2 + 0.5*(x2^2 - 1)) selects on
        both the level and the curvature of the control surface
        x1 + 0.5*x2^2; treatment adds 1 + 0.5*x3.  The quadratic selection
        breaks linear nuisance models, which is what the robustness and
        estimator-comparison suites need.
        """
        return SyntheticSpec(
            d=6,
            propensity=lambda x: _sigmoid(
                0.8 * x[:, 0]
                - 0.3 * x[:, 1]
                + 0.2 * x[:, 0] * x[:, 1]
                + 0.5 * (x[:, 1] ** 2 - 1.0)
            ),
            mu0=lambda x: x[:, 0] + 0.5 * x[:, 1] ** 2,
            mu1=lambda x: x[:, 0] + 0.5 * x[:, 1] ** 2 + 1.0 + 0.5 * x[:, 2],
            sigma=sigma,
            name="default",
        )

    @staticmethod
    def linear(effect: float = 2.0, d: int = 6, sigma: float = 0.1) -> "SyntheticSpec":
        """Linear outcome surfaces with a constant additive effect."""
        beta = np.linspace(1.0, 0.5, d)
        return SyntheticSpec(
            d=d,
            propensity=lambda x: _sigmoid(0.5 * x[:, 0]),
            mu0=lambda x: x @ beta,
            mu1=lambda x: x @ beta + effect,
            sigma=sigma,
            name="linear",
        )

    @staticmethod
    def randomized(effect: float = 2.0, d: int = 6, sigma: float = 0.1) -> "SyntheticSpec":
        """Coin-flip assignment (p = 0.5) with a constant additive effect."""
        beta = np.linspace(1.0, 0.5, d)
        return SyntheticSpec(
            d=d,
            propensity=lambda x: np.full(x.shape[0], 0.5),
            mu0=lambda x: x @ beta,
            mu1=lambda x: x @ beta + effect,
            sigma=sigma,
            name="randomized",
        )


def make_synthetic(spec: SyntheticSpec, n: int, seed: int) -> tuple[Dataset, GroundTruth]:
    """Draw a dataset from ``spec`` with exact ground truth attached.

    The draw order is fixed (covariates, then treatment uniforms, then
    outcome noise), so results are bit-identical for a given seed.
    Raises InvalidSpec if the propensity can reach 0 or 1 exactly.
    """
    if n < 2:
        raise TooFewUnits("need at least two units")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, spec.d))
    p = np.asarray(spec.propensity(x), dtype=np.float64)
    if p.shape != (n,):
        raise InvalidSpec("propensity function must return one value per unit")
    if not np.isfinite(p).all() or (p <= 0.0).any() or (p >= 1.0).any():
        raise InvalidSpec("propensity must be strictly inside (0, 1) for every unit")
    mu0 = np.asarray(spec.mu0(x), dtype=np.float64)
    mu1 = np.asarray(spec.mu1(x), dtype=np.float64)
    t = (rng.random(n) < p).astype(np.int64)
    y = np.where(t == 1, mu1, mu0)
    if spec.sigma > 0:
        y = y + spec.sigma * rng.standard_normal(n)
    return Dataset(x, t, y), GroundTruth(mu0, mu1, p)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def kfold_split(ds: Dataset, k: int, seed: int) -> FoldAssignment:
    """Randomly split units into k folds of size n/k (+-1).

    Every fold must contain at least one treated and one control unit;
    assignments violating that are re-drawn up to FOLD_REDRAW_LIMIT times
    before DegenerateFold is raised.  Deterministic given (ds, k, seed).
    """
    if k < 2:
        raise ValidationError("k must be at least 2")
    if ds.n < 2 * k:
        raise TooFewUnits(f"need at least {2 * k} units for k={k}")
    rng = np.random.default_rng(seed)
    sizes = np.full(k, ds.n // k)
    sizes[: ds.n % k] += 1
    boundaries = np.cumsum(sizes)[:-1]
    for _ in range(FOLD_REDRAW_LIMIT):
        perm = rng.permutation(ds.n)
        fold_of = np.empty(ds.n, dtype=np.int64)
        for fold, chunk in enumerate(np.split(perm, boundaries)):
            fold_of[chunk] = fold
        ok = all(
            ds.t[fold_of == fold].min() == 0 and ds.t[fold_of == fold].max() == 1
            for fold in range(k)
        )
        if ok:
            return FoldAssignment(fold_of, k)
    raise DegenerateFold(
        f"no assignment with both arms in every fold after {FOLD_REDRAW_LIMIT} draws"
    )


def train_test_split(ds: Dataset, test_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Shuffled index split; returns (train_idx, test_idx), both arms in each part."""
    if not 0.0 < test_frac < 1.0:
        raise ValidationError("test_frac must be in (0, 1)")
    n_test = int(round(ds.n * test_frac))
    if n_test < 2 or ds.n - n_test < 2:
        raise TooFewUnits("split leaves fewer than two units on one side")
    rng = np.random.default_rng(seed)
    for _ in range(FOLD_REDRAW_LIMIT):
        perm = rng.permutation(ds.n)
        test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        both = all(
            ds.t[idx].min() == 0 and ds.t[idx].max() == 1
            for idx in (train_idx, test_idx)
        )
        if both:
            return train_idx, test_idx
    raise DegenerateFold("could not split with both arms on both sides")


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
