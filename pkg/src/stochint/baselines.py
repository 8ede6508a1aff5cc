"""Comparison estimators: OLS plug-in, IPW, AIPW, SMA policies, random policy."""

from __future__ import annotations

import numpy as np

from .data import Dataset, kfold_split
from .errors import EmptyArm, LengthMismatch, ValidationError
from .estimator import InfluenceArrays, m_values
from .nuisance import (
    NuisanceSpec,
    OutcomeConfig,
    cross_fit,
    fit_outcome,
    fit_propensity,
)

ATE_BASELINE_KINDS = ("ols_plugin", "ipw", "aipw")
SMA_LEARNERS = ("linear", "gbstumps")


def estimate_ate_baseline(
    kind: str,
    ds: Dataset,
    k: int = 5,
    seed: int = 0,
    nuisance: NuisanceSpec = NuisanceSpec(),
    hajek: bool = False,
) -> float:
    """Average-treatment-effect estimate from one of the baseline methods.

    ols_plugin: per-arm ridge regressions, mean(f1_hat(x) - f0_hat(x)).
    ipw:        classical inverse-propensity weighting; the propensity is a
                plain logistic on the raw covariates, fitted on the full
                sample and clipped (unnormalized weights by default, Hajek
                via ``hajek``).
    aipw:       doubly-robust mean(m1 - m0) reusing the influence arm
                values with cross-fitted nuisances.
    """
    if kind == "ols_plugin":
        cfg = OutcomeConfig(learner="linear", per_arm=True, ridge=nuisance.outcome.ridge)
        model = fit_outcome(ds, None, cfg)
        mu0_hat, mu1_hat = model.predict_both(ds.x)
        return float(np.mean(mu1_hat - mu0_hat))
    if kind == "ipw":
        model = fit_propensity(
            ds, None, basis="raw", reg=nuisance.propensity_ridge,
            clip=nuisance.clip, seed=seed,
        )
        return ipw_from_values(ds.t, ds.y, model.predict(ds.x), hajek=hajek)
    if kind == "aipw":
        folds = kfold_split(ds, k, seed)
        pairs = cross_fit(ds, folds, nuisance, seed=seed)
        arrays = InfluenceArrays.from_pairs(ds, folds, pairs)
        return aipw_from_values(ds.t, ds.y, arrays.p_hat, arrays.mu0_hat, arrays.mu1_hat)
    raise ValidationError(f"unknown ATE baseline {kind!r}")


def ipw_from_values(t, y, p_hat, hajek: bool = False) -> float:
    """IPW difference of weighted arm means from precomputed propensities."""
    t = np.asarray(t)
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p_hat, dtype=np.float64)
    w1 = np.where(t == 1, 1.0 / p, 0.0)
    w0 = np.where(t == 0, 1.0 / (1.0 - p), 0.0)
    if hajek:
        return float(np.sum(w1 * y) / np.sum(w1) - np.sum(w0 * y) / np.sum(w0))
    return float(np.mean(w1 * y) - np.mean(w0 * y))


def aipw_from_values(t, y, p_hat, mu0_hat, mu1_hat) -> float:
    """Doubly-robust ATE from precomputed nuisance values: mean(m1 - m0)."""
    m0, m1 = m_values(t, y, p_hat, mu0_hat, mu1_hat)
    return float(np.mean(m1 - m0))


def fit_sma(ds: Dataset, learner: str = "linear", seed: int = 0,
            rounds: int = 100, learning_rate: float = 0.1, ridge: float = 1e-3):
    """Fit the separate-model-approach pair: one outcome model per arm."""
    if learner not in SMA_LEARNERS:
        raise ValidationError(f"unknown SMA learner {learner!r}")
    if ds.t.min() == 1 or ds.t.max() == 0:
        raise EmptyArm("SMA needs units in both treatment arms")
    cfg = OutcomeConfig(
        learner=learner, per_arm=True, rounds=rounds,
        learning_rate=learning_rate, ridge=ridge,
    )
    return fit_outcome(ds, None, cfg)


def sma_policy_from_model(model, x: np.ndarray) -> np.ndarray:
    """Treat exactly when the treated-arm prediction strictly exceeds control."""
    mu0_hat, mu1_hat = model.predict_both(x)
    return (mu1_hat > mu0_hat).astype(np.int64)


def sma_policy(ds: Dataset, learner: str = "linear", seed: int = 0) -> np.ndarray:
    """In-sample SMA policy: fit per-arm models, treat where f1_hat > f0_hat."""
    model = fit_sma(ds, learner=learner, seed=seed)
    return sma_policy_from_model(model, ds.x)


def random_policy(n: int, p: float, seed: int = 0) -> np.ndarray:
    """I.i.d. Bernoulli(p) policy vector; deterministic given seed."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must lie in [0, 1]")
    if n < 0:
        raise LengthMismatch("n must be non-negative")
    rng = np.random.default_rng(seed)
    return (rng.random(n) < p).astype(np.int64)
