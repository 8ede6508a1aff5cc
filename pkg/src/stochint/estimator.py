"""Stochastic-intervention effect estimation.

A stochastic intervention of degree delta multiplies every unit's treatment
odds by delta; the shifted propensity is

    q(p, delta) = delta * p / (delta * p + 1 - p).

Per-unit influence values combine q with doubly-robust arm corrections

    m1 = 1{t=1} * (y - mu_hat(x, 1)) / p_hat       + mu_hat(x, 1)
    m0 = 1{t=0} * (y - mu_hat(x, 0)) / (1 - p_hat) + mu_hat(x, 0)
    phi = q * m1 + (1 - q) * m0

and the counterfactual-outcome estimate is psi_hat = mean(phi).  The effect
of intervening at degree delta relative to observation is
tau_sie = psi_hat - mean(y).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import phi_values
from .data import Dataset, FoldAssignment, GroundTruth, kfold_split
from .errors import DomainError, NoGroundTruth, PositivityWarning
from .nuisance import NuisancePair, NuisanceSpec, cross_fit

POSITIVITY_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class StochasticDegree:
    """Multiplicative odds shift; delta = 1 leaves assignment untouched."""

    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise DomainError(f"delta must be a positive finite number, got {self.delta}")

    @property
    def lam(self) -> float:
        """Log-degree; the internal parameterization."""
        return math.log(self.delta)

    @staticmethod
    def from_lambda(lam: float) -> "StochasticDegree":
        return StochasticDegree(math.exp(lam))


@dataclass(frozen=True)
class InfluenceRecord:
    """Per-unit intermediate values: shifted propensity q, arm corrections, phi."""

    unit: int
    q: float
    m0: float
    m1: float
    phi: float


def stochastic_propensity(p_hat, delta):
    """Shift the treatment odds of ``p_hat`` by the factor ``delta``.

    Computed in log-odds space, logit(q) = logit(p_hat) + log(delta), which
    is algebraically delta*p/(delta*p + 1 - p) but safe at extreme deltas.
    Accepts scalars or arrays; strictly increasing in both arguments.
    """
    if isinstance(delta, StochasticDegree):
        delta = delta.delta
    delta = float(delta)
    if not (delta > 0 and math.isfinite(delta)):
        raise DomainError(f"delta must be a positive finite number, got {delta}")
    p = np.asarray(p_hat, dtype=np.float64)
    if ((p <= 0.0) | (p >= 1.0)).any():
        raise DomainError("p_hat must lie strictly inside (0, 1)")
    q = _sigmoid(_logit(p) + math.log(delta))
    return float(q) if np.isscalar(p_hat) else q


def m_values(t, y, p_hat, mu0_hat, mu1_hat):
    """Doubly-robust arm values (m0, m1).

    The observed arm gets an inverse-propensity-weighted residual
    correction; the unobserved arm is the model prediction alone.
    Vectorized; scalars in give scalars out.
    """
    t_arr = np.asarray(t)
    y_arr = np.asarray(y, dtype=np.float64)
    p = np.asarray(p_hat, dtype=np.float64)
    mu0 = np.asarray(mu0_hat, dtype=np.float64)
    mu1 = np.asarray(mu1_hat, dtype=np.float64)
    treated = t_arr == 1
    m1 = np.where(treated, (y_arr - mu1) / p, 0.0) + mu1
    m0 = np.where(~treated, (y_arr - mu0) / (1.0 - p), 0.0) + mu0
    if np.isscalar(t):
        return float(m0), float(m1)
    return m0, m1


def influence(unit, t, y, p_hat, mu0_hat, mu1_hat, delta) -> InfluenceRecord:
    """Influence record for one unit at stochastic degree ``delta``."""
    q = stochastic_propensity(p_hat, delta)
    m0, m1 = m_values(t, y, p_hat, mu0_hat, mu1_hat)
    phi = m0 + q * (m1 - m0)
    return InfluenceRecord(unit=unit, q=q, m0=m0, m1=m1, phi=phi)


@dataclass(frozen=True)
class InfluenceArrays:
    """Per-unit nuisance values, ready for influence evaluation.

    ``logit_p`` caches logit(p_hat); ``m0``/``m1`` are the arm values.  The
    optimizer evaluates many candidate degree vectors against one of these.
    """

    t: np.ndarray
    y: np.ndarray
    p_hat: np.ndarray
    mu0_hat: np.ndarray
    mu1_hat: np.ndarray
    m0: np.ndarray = field(init=False)
    m1: np.ndarray = field(init=False)
    logit_p: np.ndarray = field(init=False)

    def __post_init__(self):
        if ((self.p_hat <= 0.0) | (self.p_hat >= 1.0)).any():
            raise DomainError("propensity values must lie strictly inside (0, 1)")
        m0, m1 = m_values(self.t, self.y, self.p_hat, self.mu0_hat, self.mu1_hat)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "m1", m1)
        object.__setattr__(self, "logit_p", _logit(self.p_hat))

    @property
    def n(self) -> int:
        return self.t.shape[0]

    def phi(self, lam) -> np.ndarray:
        """Influence values at per-unit log-degrees ``lam`` (scalar or vector)."""
        lam_vec = np.broadcast_to(np.asarray(lam, dtype=np.float64), self.t.shape)
        return phi_values(self.logit_p, self.m0, self.m1, np.ascontiguousarray(lam_vec))

    @staticmethod
    def from_oracle(ds: Dataset, gt: GroundTruth) -> "InfluenceArrays":
        """Substitute exact ground truth for the fitted nuisances (unclipped)."""
        if gt is None or gt.p_true is None:
            raise NoGroundTruth("oracle mode needs mu0, mu1 and p_true")
        return InfluenceArrays(ds.t, ds.y, gt.p_true, gt.mu0, gt.mu1)

    @staticmethod
    def from_pairs(ds: Dataset, folds: FoldAssignment,
                   pairs: list[NuisancePair]) -> "InfluenceArrays":
        """Score every unit with the pair assigned to its own fold."""
        p_hat = np.empty(ds.n)
        mu0_hat = np.empty(ds.n)
        mu1_hat = np.empty(ds.n)
        for pair in pairs:
            idx = folds.indices(pair.fold)
            p_hat[idx] = pair.propensity.predict(ds.x[idx])
            mu0_hat[idx], mu1_hat[idx] = pair.outcome.predict_both(ds.x[idx])
        return InfluenceArrays(ds.t, ds.y, p_hat, mu0_hat, mu1_hat)

    @staticmethod
    def from_single_pair(ds: Dataset, pair: NuisancePair) -> "InfluenceArrays":
        """Score every unit with one fitted pair (e.g. on a held-out split)."""
        p_hat = pair.propensity.predict(ds.x)
        mu0_hat, mu1_hat = pair.outcome.predict_both(ds.x)
        return InfluenceArrays(ds.t, ds.y, p_hat, mu0_hat, mu1_hat)


@dataclass(frozen=True)
class SieReport:
    """Estimates from one run: counterfactual mean and effect decompositions.

    tau_sie = psi_hat - mean(y) holds exactly by construction.
    tau_ate_plugin is the outcome-model plug-in mean(mu1_hat - mu0_hat)
    (treated minus control), the quantity compared against ground truth;
    tau_alg1 is the companion expected-outcome average
    mean(p_hat * mu1_hat + (1 - p_hat) * mu0_hat).
    """

    psi_hat: float
    tau_sie: float
    tau_ate_plugin: float
    tau_alg1: float
    delta: float
    k: int
    seed: int
    n: int
    positivity_clip_fraction: float
    per_fold: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "psi_hat": self.psi_hat,
            "tau_sie": self.tau_sie,
            "tau_ate_plugin": self.tau_ate_plugin,
            "tau_alg1": self.tau_alg1,
            "delta": self.delta,
            "k": self.k,
            "seed": self.seed,
            "n": self.n,
            "positivity_clip_fraction": self.positivity_clip_fraction,
            "per_fold": list(self.per_fold),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class PreparedInfluence:
    """Cross-fitted (or oracle) per-unit nuisances plus fold diagnostics.

    Building this is the expensive part of estimation; one instance can be
    reused across many delta values.
    """

    arrays: InfluenceArrays
    per_fold: tuple[dict, ...]
    clip_fraction: float


def prepare_influence(
    ds: Dataset,
    k: int = 5,
    nuisance: NuisanceSpec = NuisanceSpec(),
    seed: int = 0,
    oracle: GroundTruth | None = None,
    within_fold: bool = False,
) -> PreparedInfluence:
    """Cross-fit nuisances and score every unit out-of-fold.

    With ``oracle`` the fitted nuisances are replaced by the exact
    ground-truth surfaces and propensities (no fitting, no clipping).
    Emits PositivityWarning when more than 5% of the propensity predictions
    sit on the clip bounds.
    """
    folds = kfold_split(ds, k, seed)
    per_fold = []
    if oracle is not None:
        arrays = InfluenceArrays.from_oracle(ds, oracle)
        clip_fraction = 0.0
        for fold in range(k):
            idx = folds.indices(fold)
            per_fold.append(
                {"fold": fold, "size": int(idx.size), "treated": int(ds.t[idx].sum())}
            )
    else:
        pairs = cross_fit(ds, folds, nuisance, seed=seed, within_fold=within_fold)
        arrays = InfluenceArrays.from_pairs(ds, folds, pairs)
        lo, hi = nuisance.clip
        at_bound = (arrays.p_hat <= lo) | (arrays.p_hat >= hi)
        clip_fraction = float(np.mean(at_bound))
        for pair in pairs:
            idx = folds.indices(pair.fold)
            per_fold.append(
                {
                    "fold": pair.fold,
                    "size": int(idx.size),
                    "treated": int(ds.t[idx].sum()),
                    "fitted_on": int(pair.fitted_on.size),
                    "propensity_converged": bool(pair.propensity.converged),
                    "clip_fraction": float(np.mean(at_bound[idx])),
                }
            )
        if clip_fraction > POSITIVITY_WARN_FRACTION:
            warnings.warn(
                f"{clip_fraction:.1%} of propensity predictions sit on the "
                f"clip bounds {nuisance.clip}; positivity looks strained",
                PositivityWarning,
            )
    return PreparedInfluence(arrays, tuple(per_fold), clip_fraction)


def estimate_sie(
    ds: Dataset,
    delta: float | StochasticDegree = 1.0,
    k: int = 5,
    nuisance: NuisanceSpec = NuisanceSpec(),
    seed: int = 0,
    oracle: GroundTruth | None = None,
    within_fold: bool = False,
    prepared: PreparedInfluence | None = None,
) -> SieReport:
    """Estimate the stochastic-intervention effect at degree ``delta``.

    Splits the data into k folds, cross-fits the nuisance pair (fit on each
    fold's complement unless ``within_fold``), scores every unit with its
    out-of-fold pair, and averages the influence values.  Pass ``prepared``
    to reuse nuisances across calls.  Deterministic given (ds, config, seed).
    """
    degree = delta if isinstance(delta, StochasticDegree) else StochasticDegree(float(delta))
    if prepared is None:
        prepared = prepare_influence(
            ds, k=k, nuisance=nuisance, seed=seed, oracle=oracle, within_fold=within_fold
        )
    arrays = prepared.arrays
    clip_fraction = prepared.clip_fraction

    phi = arrays.phi(degree.lam)
    psi_hat = float(np.mean(phi))
    tau_sie = psi_hat - float(np.mean(ds.y))
    tau_ate_plugin = float(np.mean(arrays.mu1_hat - arrays.mu0_hat))
    tau_alg1 = float(
        np.mean(arrays.p_hat * arrays.mu1_hat + (1.0 - arrays.p_hat) * arrays.mu0_hat)
    )
    return SieReport(
        psi_hat=psi_hat,
        tau_sie=tau_sie,
        tau_ate_plugin=tau_ate_plugin,
        tau_alg1=tau_alg1,
        delta=degree.delta,
        k=k,
        seed=seed,
        n=ds.n,
        positivity_clip_fraction=clip_fraction,
        per_fold=prepared.per_fold,
    )


def psi_oracle(gt: GroundTruth, delta: float) -> float:
    """Ground-truth counterfactual mean at degree ``delta``.

    Monte-Carlo functional: mean over units of q_true*mu1 + (1-q_true)*mu0
    with q_true = delta*p_true / (delta*p_true + 1 - p_true).  Written with
    the textbook ratio (not the log-odds path) so it is an independent
    check of the estimator's formula route.
    """
    if gt is None or gt.p_true is None:
        raise NoGroundTruth("psi_oracle needs mu0, mu1 and p_true")
    if not (delta > 0 and math.isfinite(delta)):
        raise DomainError(f"delta must be a positive finite number, got {delta}")
    q = delta * gt.p_true / (delta * gt.p_true + 1.0 - gt.p_true)
    return float(np.mean(q * gt.mu1 + (1.0 - q) * gt.mu0))


def ate_error(tau_hat: float, gt: GroundTruth) -> float:
    """Absolute deviation of an ATE estimate from the ground-truth ATE."""
    if gt is None:
        raise NoGroundTruth("ate_error needs ground-truth outcome surfaces")
    return abs(float(tau_hat) - gt.ate())


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
