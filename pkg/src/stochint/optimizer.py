"""Random-search optimization of per-unit stochastic intervention degrees.

The decision variable is a length-n vector of log-degrees lambda (degree
delta_i = exp(lambda_i); the zero vector means no intervention anywhere).
Each step samples m random directions, evaluates the summed influence
reward at symmetric perturbations lambda +- nu*d_k, keeps the b
best-performing directions, and moves along their reward-difference-weighted
combination.  A raw-degree fidelity mode optimizes delta directly with
clamping instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import reward_batch
from .errors import LengthMismatch, NonFiniteReward, ValidationError
from .estimator import InfluenceArrays, _logit, _sigmoid

RAW_DELTA_CLAMP = (1e-3, 1e3)


@dataclass(frozen=True)
class DeltaParam:
    """Per-unit intervention degrees, stored as log-degrees."""

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=np.float64)
        if lam.ndim != 1:
            raise ValidationError("lambda must be a 1-d vector")
        if not np.isfinite(lam).all():
            raise ValidationError("lambda entries must be finite")
        object.__setattr__(self, "lam", lam)

    @property
    def deltas(self) -> np.ndarray:
        return np.exp(self.lam)

    @staticmethod
    def zeros(n: int) -> "DeltaParam":
        return DeltaParam(np.zeros(n))


@dataclass(frozen=True)
class RsConfig:
    """Random-search hyperparameters.

    alpha: step size; nu: exploration noise scale; steps: number of update
    steps; directions: probes per step (m); top_directions: directions kept
    for the update (b <= m).  ``resample_directions`` draws fresh directions
    every step (set False for the draw-once variant).
    ``normalize_rewards`` divides updates by the standard deviation of the
    rewards used.  ``param_mode`` is "log" (default) or "raw".
    """

    alpha: float = 0.25
    nu: float = 0.05
    steps: int = 100
    directions: int = 32
    top_directions: int = 8
    resample_directions: bool = True
    normalize_rewards: bool = False
    param_mode: str = "log"
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.nu <= 0:
            raise ValidationError("alpha and nu must be positive")
        if self.steps < 0:
            raise ValidationError("steps must be non-negative")
        if self.directions < 1:
            raise ValidationError("need at least one direction")
        if not 1 <= self.top_directions <= self.directions:
            raise ValidationError("top_directions must lie in [1, directions]")
        if self.param_mode not in ("log", "raw"):
            raise ValidationError("param_mode must be 'log' or 'raw'")


@dataclass(frozen=True)
class StepRecord:
    step: int
    best_reward: float
    mean_reward: float
    update_norm: float

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "best_reward": self.best_reward,
            "mean_reward": self.mean_reward,
            "update_norm": self.update_norm,
        }


@dataclass(frozen=True)
class OptimizeResult:
    """Final parameter, per-step log, and rewards at the accepted iterates."""

    param: DeltaParam
    steps: tuple[StepRecord, ...]
    iterate_rewards: tuple[float, ...]

    @property
    def initial_reward(self) -> float:
        return self.iterate_rewards[0]

    @property
    def final_reward(self) -> float:
        return self.iterate_rewards[-1]


def reward(arrays: InfluenceArrays, lam) -> float:
    """Summed influence values at per-unit log-degrees ``lam``."""
    if isinstance(lam, DeltaParam):
        lam = lam.lam
    return float(np.sum(arrays.phi(lam)))


def optimize(arrays: InfluenceArrays, cfg: RsConfig = RsConfig()) -> OptimizeResult:
    """Search for per-unit degrees maximizing the summed influence reward.

    Starts from no intervention.  Directions are standard-normal vectors;
    at each step the b directions with the largest max(forward, backward)
    reward are combined, weighted by their forward-minus-backward reward
    difference, and scaled by alpha/b.  Ties in the direction ranking break
    toward the lower direction index.  Deterministic given (arrays, cfg).
    """
    n = arrays.n
    rng = np.random.default_rng(cfg.seed)
    raw_mode = cfg.param_mode == "raw"
    param = np.zeros(n)

    dirs = None
    if not cfg.resample_directions:
        dirs = rng.standard_normal((cfg.directions, n))

    def evaluate(vec) -> float:
        return float(np.sum(arrays.phi(_as_lambda(vec, raw_mode))))

    iterate_rewards = [evaluate(param)]
    records = []
    for step in range(cfg.steps):
        if cfg.resample_directions:
            dirs = rng.standard_normal((cfg.directions, n))
        if raw_mode:
            r_plus = np.array([evaluate(param + cfg.nu * d) for d in dirs])
            r_minus = np.array([evaluate(param - cfg.nu * d) for d in dirs])
        else:
            r_plus, r_minus = reward_batch(
                arrays.logit_p, arrays.m0, arrays.m1, param, dirs, cfg.nu
            )
        if not (np.isfinite(r_plus).all() and np.isfinite(r_minus).all()):
            raise NonFiniteReward(step)
        ranking = np.argsort(-np.maximum(r_plus, r_minus), kind="stable")
        top = ranking[: cfg.top_directions]
        weights = r_plus[top] - r_minus[top]
        update = (cfg.alpha / cfg.top_directions) * (weights[:, None] * dirs[top]).sum(axis=0)
        if cfg.normalize_rewards:
            sigma = float(np.std(np.concatenate([r_plus[top], r_minus[top]])))
            if sigma > 0:
                update = update / sigma
        param = param + update
        iterate_rewards.append(evaluate(param))
        records.append(
            StepRecord(
                step=step,
                best_reward=float(max(r_plus.max(), r_minus.max())),
                mean_reward=float(np.mean(np.concatenate([r_plus, r_minus]))),
                update_norm=float(np.linalg.norm(update)),
            )
        )

    final_lam = _as_lambda(param, raw_mode)
    return OptimizeResult(DeltaParam(final_lam), tuple(records), tuple(iterate_rewards))


def policy_value(t, y, p_hat, policy) -> float:
    """Inverse-propensity estimate of the mean outcome under ``policy``.

    Units whose observed treatment matches the policy contribute
    y / rho, where rho is the estimated probability of the treatment they
    actually received (p_hat when treated, 1 - p_hat when not); all other
    units contribute zero.
    """
    t = np.asarray(t)
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p_hat, dtype=np.float64)
    pi = np.asarray(policy)
    if not (t.shape == y.shape == p.shape == pi.shape):
        raise LengthMismatch("t, y, p_hat and policy must have identical shapes")
    rho = np.where(t == 1, p, 1.0 - p)
    matched = t == pi
    return float(np.mean(np.where(matched, y / rho, 0.0)))


def delta_to_policy(lam, p_hat, threshold: float = 0.5) -> np.ndarray:
    """Binary policy: treat where the shifted propensity reaches ``threshold``."""
    if isinstance(lam, DeltaParam):
        lam = lam.lam
    lam = np.asarray(lam, dtype=np.float64)
    p = np.asarray(p_hat, dtype=np.float64)
    if lam.shape != p.shape:
        raise LengthMismatch("lambda and p_hat must have identical shapes")
    q = _sigmoid(_logit(p) + lam)
    return (q >= threshold).astype(np.int64)


def _as_lambda(vec, raw_mode: bool) -> np.ndarray:
    if not raw_mode:
        return vec
    lo, hi = RAW_DELTA_CLAMP
    return np.log(np.clip(vec, lo, hi))
