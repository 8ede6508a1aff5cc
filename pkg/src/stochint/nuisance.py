"""Nuisance models: basis-expanded propensity and potential-outcome learners.

The propensity model is a logistic regression on nonlinear basis features,
fitted by full-batch iteratively reweighted least squares with a ridge
penalty (intercept unpenalized) and monotone line-searched steps.  Outcome
models are either ridge regression or gradient-boosted depth-1 stumps.
Deliberate-misspecification switches (intercept-only propensity, global-mean
outcome) support the robustness test suite.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import best_stump
from .data import Dataset, FoldAssignment
from .errors import (
    DegenerateDesign,
    EmptyArm,
    NonConvergence,
    SingleClass,
    ValidationError,
)

DEFAULT_CLIP = (0.01, 0.99)

BASIS_KINDS = ("raw", "polynomial2", "polynomial2_plus_rbf")


# ---------------------------------------------------------------------------
# Standardization (statistics always come from the training split)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return Standardizer(mean, std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


# ---------------------------------------------------------------------------
# Basis expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasisExpansion:
    """Feature map for the propensity model.

    kinds:
      raw                   -> [1, x]
      polynomial2           -> [1, x_i, x_i * x_j for i <= j]
      polynomial2_plus_rbf  -> polynomial2 plus Gaussian bumps
                               exp(-||x - c||^2 / (2 * bandwidth^2))
    """

    kind: str
    d: int
    centers: np.ndarray | None = None
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in BASIS_KINDS and self.kind != "intercept":
            raise ValidationError(f"unknown basis kind {self.kind!r}")
        if self.kind == "polynomial2_plus_rbf":
            if self.centers is None or self.bandwidth is None or self.bandwidth <= 0:
                raise ValidationError("rbf basis needs centers and a positive bandwidth")

    @property
    def s(self) -> int:
        """Expanded dimension."""
        if self.kind == "intercept":
            return 1
        if self.kind == "raw":
            return 1 + self.d
        s = 1 + self.d + self.d * (self.d + 1) // 2
        if self.kind == "polynomial2_plus_rbf":
            s += self.centers.shape[0]
        return s

    def expand(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n, d = x.shape
        if d != self.d:
            raise ValidationError(f"expected {self.d} covariates, got {d}")
        if self.kind == "intercept":
            return np.ones((n, 1))
        cols = [np.ones(n), *(x[:, j] for j in range(d))]
        if self.kind != "raw":
            for i in range(d):
                for j in range(i, d):
                    cols.append(x[:, i] * x[:, j])
        out = np.column_stack(cols)
        if self.kind == "polynomial2_plus_rbf":
            d2 = ((x[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
            out = np.hstack([out, np.exp(-d2 / (2.0 * self.bandwidth**2))])
        return out


def make_basis(kind: str, x_train: np.ndarray, seed: int = 0) -> BasisExpansion:
    """Build a BasisExpansion, fitting RBF centers/bandwidth when needed.

    Centers come from a deterministic k-means (k = min(10, floor(sqrt(n))))
    on the training covariates; the bandwidth is the median pairwise
    distance among up to 500 training points.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    d = x_train.shape[1]
    if kind in ("raw", "polynomial2", "intercept"):
        return BasisExpansion(kind, d)
    if kind != "polynomial2_plus_rbf":
        raise ValidationError(f"unknown basis kind {kind!r}")
    n = x_train.shape[0]
    k = max(1, min(10, int(np.sqrt(n))))
    centers = _kmeans(x_train, k, seed)
    sub = x_train[: min(n, 500)]
    dist = np.sqrt(((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=2))
    bandwidth = float(np.median(dist[np.triu_indices_from(dist, k=1)]))
    if bandwidth <= 0:
        bandwidth = 1.0
    return BasisExpansion(kind, d, centers=centers, bandwidth=bandwidth)


def _kmeans(x, k, seed, iters=25):
    rng = np.random.default_rng(seed)
    centers = x[rng.choice(x.shape[0], size=k, replace=False)].copy()
    for _ in range(iters):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        label = d2.argmin(axis=1)
        new = centers.copy()
        for j in range(k):
            members = x[label == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                new[j] = x[rng.integers(x.shape[0])]
        if np.allclose(new, centers):
            break
        centers = new
    return centers


# ---------------------------------------------------------------------------
# Propensity model (ridge-penalized logistic via IRLS)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropensityModel:
    """Fitted basis logistic model; predictions are clipped to ``clip``."""

    beta: np.ndarray
    basis: BasisExpansion
    scaler: Standardizer
    clip: tuple[float, float] = DEFAULT_CLIP
    converged: bool = True
    n_iter: int = 0
    grad_norm: float = 0.0
    loss_path: tuple[float, ...] = field(default=(), repr=False)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Treatment probabilities in [clip.lo, clip.hi]."""
        eta = self.basis.expand(self.scaler.apply(np.atleast_2d(x))) @ self.beta
        return np.clip(_sigmoid(eta), self.clip[0], self.clip[1])

    def to_json(self) -> str:
        doc = {
            "model": "propensity",
            "basis_kind": self.basis.kind,
            "d": self.basis.d,
            "centers": None if self.basis.centers is None else self.basis.centers.tolist(),
            "bandwidth": self.basis.bandwidth,
            "beta": self.beta.tolist(),
            "clip": list(self.clip),
            "scaler_mean": self.scaler.mean.tolist(),
            "scaler_std": self.scaler.std.tolist(),
            "converged": self.converged,
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "PropensityModel":
        doc = json.loads(text)
        centers = doc["centers"]
        basis = BasisExpansion(
            doc["basis_kind"],
            doc["d"],
            centers=None if centers is None else np.asarray(centers),
            bandwidth=doc["bandwidth"],
        )
        return PropensityModel(
            beta=np.asarray(doc["beta"]),
            basis=basis,
            scaler=Standardizer(np.asarray(doc["scaler_mean"]), np.asarray(doc["scaler_std"])),
            clip=tuple(doc["clip"]),
            converged=doc["converged"],
        )


def fit_propensity(
    ds: Dataset,
    idx: np.ndarray | None = None,
    basis: str | BasisExpansion = "polynomial2",
    reg: float = 1e-3,
    clip: tuple[float, float] = DEFAULT_CLIP,
    max_iter: int = 200,
    tol: float = 1e-8,
    seed: int = 0,
) -> PropensityModel:
    """Fit the basis logistic propensity on the units in ``idx``.

    Minimizes the ridge-penalized negative log-likelihood (intercept
    unpenalized) until the gradient norm per training unit falls below
    ``tol``, or ``max_iter`` IRLS steps; each step is halved until the
    penalized loss does not increase.  A model that stops early is returned
    flagged, with a NonConvergence warning carrying the final gradient norm.
    """
    if idx is None:
        idx = np.arange(ds.n)
    idx = np.asarray(idx)
    t = ds.t[idx].astype(np.float64)
    if t.min() == t.max():
        raise SingleClass("training indices contain a single treatment class")
    if not 0 < clip[0] < clip[1] < 1:
        raise ValidationError("clip bounds must satisfy 0 < lo < hi < 1")
    if reg < 0:
        raise ValidationError("ridge strength must be non-negative")

    scaler = Standardizer.fit(ds.x[idx])
    if isinstance(basis, str):
        basis = make_basis(basis, scaler.apply(ds.x[idx]), seed=seed)
    g = basis.expand(scaler.apply(ds.x[idx]))
    n, s = g.shape

    # Ridge mask: column 0 is the intercept for every kind.
    pen = np.full(s, reg)
    pen[0] = 0.0

    def loss(beta):
        eta = g @ beta
        nll = float(np.sum(np.logaddexp(0.0, eta) - t * eta))
        return nll + 0.5 * float(pen @ (beta * beta))

    beta = np.zeros(s)
    current = loss(beta)
    path = [current]
    grad_norm = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        mu = _sigmoid(g @ beta)
        grad = g.T @ (mu - t) + pen * beta
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol * n:
            break
        w = np.maximum(mu * (1.0 - mu), 1e-10)
        hess = (g * w[:, None]).T @ g + np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise DegenerateDesign("singular IRLS system; increase ridge strength") from None
        scale = 1.0
        for _ in range(40):
            candidate = loss(beta - scale * step)
            if candidate <= current:
                break
            scale *= 0.5
        else:
            break  # no improving step length: at numerical optimum
        beta = beta - scale * step
        current = candidate
        path.append(current)

    converged = grad_norm <= tol * n
    if not converged:
        warnings.warn(
            f"propensity fit stopped at gradient norm {grad_norm:.3e} "
            f"after {n_iter} iterations",
            NonConvergence,
        )
    return PropensityModel(
        beta=beta,
        basis=basis,
        scaler=scaler,
        clip=clip,
        converged=converged,
        n_iter=n_iter,
        grad_norm=grad_norm,
        loss_path=tuple(path),
    )


# ---------------------------------------------------------------------------
# Outcome models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutcomeConfig:
    """Configuration for fit_outcome.

    The default is boosted stumps fitted per treatment arm; a single model
    on the concatenated (x, t) design is available with ``per_arm=False``
    (note depth-1 boosting on (x, t) cannot represent treatment-covariate
    interactions).  ``misspecified`` replaces the learner with the global
    training mean.
    """

    learner: str = "gbstumps"  # or "linear"
    per_arm: bool = True
    rounds: int = 300
    learning_rate: float = 0.1
    ridge: float = 1e-3
    misspecified: bool = False

    def __post_init__(self):
        if self.learner not in ("gbstumps", "linear"):
            raise ValidationError(f"unknown outcome learner {self.learner!r}")
        if self.rounds < 0 or self.learning_rate <= 0 or self.ridge < 0:
            raise ValidationError("invalid outcome hyperparameters")


class OutcomeModel:
    """Interface: predict(x, t) -> per-unit outcome predictions."""

    def predict(self, x: np.ndarray, t) -> np.ndarray:
        raise NotImplementedError

    def predict_both(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mu0_hat, mu1_hat) for every row of x."""
        x = np.atleast_2d(x)
        zeros = np.zeros(x.shape[0], dtype=np.int64)
        return self.predict(x, zeros), self.predict(x, 1 - zeros)

    def to_json(self) -> str:
        raise NotImplementedError


class MeanOutcome(OutcomeModel):
    """Misspecification switch: every prediction is the training mean."""

    def __init__(self, mean: float):
        self.mean = float(mean)

    def predict(self, x, t):
        return np.full(np.atleast_2d(x).shape[0], self.mean)

    def to_json(self):
        return json.dumps({"model": "outcome_mean", "mean": self.mean})


class RidgeOutcome(OutcomeModel):
    """Linear least squares with an (unpenalized-intercept) ridge term."""

    def __init__(self, coef, scaler, per_arm: bool):
        self.coef = coef  # per_arm: {0: w0, 1: w1}; single: one vector on [1, x, t]
        self.scaler = scaler
        self.per_arm = per_arm

    @staticmethod
    def fit(x, t, y, cfg: OutcomeConfig) -> "RidgeOutcome":
        scaler = Standardizer.fit(x)
        xs = scaler.apply(x)
        if cfg.per_arm:
            coef = {}
            for arm in (0, 1):
                mask = t == arm
                if not mask.any():
                    raise EmptyArm(f"treatment arm {arm} is empty in the training indices")
                coef[arm] = _ridge_solve(_design(xs[mask]), y[mask], cfg.ridge)
            return RidgeOutcome(coef, scaler, per_arm=True)
        design = np.hstack([_design(xs), t[:, None].astype(np.float64)])
        return RidgeOutcome(_ridge_solve(design, y, cfg.ridge), scaler, per_arm=False)

    def predict(self, x, t):
        xs = self.scaler.apply(np.atleast_2d(x))
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (xs.shape[0],))
        if self.per_arm:
            p0 = _design(xs) @ self.coef[0]
            p1 = _design(xs) @ self.coef[1]
            return np.where(t == 1, p1, p0)
        return np.hstack([_design(xs), t[:, None]]) @ self.coef

    def to_json(self):
        doc = {
            "model": "outcome_ridge",
            "per_arm": self.per_arm,
            "scaler_mean": self.scaler.mean.tolist(),
            "scaler_std": self.scaler.std.tolist(),
        }
        if self.per_arm:
            doc["coef0"] = self.coef[0].tolist()
            doc["coef1"] = self.coef[1].tolist()
        else:
            doc["coef"] = self.coef.tolist()
        return json.dumps(doc)


class _StumpEnsemble:
    """Boosted depth-1 trees on a fixed design matrix."""

    __slots__ = ("base", "learning_rate", "stumps", "loss_path")

    def __init__(self, base, learning_rate, stumps, loss_path):
        self.base = base
        self.learning_rate = learning_rate
        self.stumps = stumps  # list of (feature, threshold, left, right)
        self.loss_path = loss_path

    @staticmethod
    def fit(design, y, rounds, learning_rate):
        design = np.ascontiguousarray(design, dtype=np.float64)
        n = design.shape[0]
        order = np.ascontiguousarray(np.argsort(design, axis=0).astype(np.int64))
        base = float(np.mean(y))
        pred = np.full(n, base)
        stumps = []
        loss_path = [float(np.mean((y - pred) ** 2))]
        for _ in range(rounds):
            resid = y - pred
            feat, thr, left, right, score = best_stump(design, order, resid)
            total = float(np.sum(resid))
            # stop once the best split no longer reduces the squared loss
            if feat < 0 or score - total * total / n <= 1e-12 * max(1.0, abs(score)):
                break
            stumps.append((int(feat), float(thr), float(left), float(right)))
            contrib = np.where(design[:, feat] <= thr, left, right)
            pred = pred + learning_rate * contrib
            loss_path.append(float(np.mean((y - pred) ** 2)))
        return _StumpEnsemble(base, learning_rate, stumps, tuple(loss_path))

    def predict(self, design):
        out = np.full(design.shape[0], self.base)
        for feat, thr, left, right in self.stumps:
            out += self.learning_rate * np.where(design[:, feat] <= thr, left, right)
        return out


class BoostedStumpsOutcome(OutcomeModel):
    """Gradient boosting with depth-1 trees under squared loss."""

    def __init__(self, ensembles, scaler, per_arm: bool, cfg: OutcomeConfig):
        self.ensembles = ensembles  # per_arm: {0: ens, 1: ens}; single: ens on [x, t]
        self.scaler = scaler
        self.per_arm = per_arm
        self.cfg = cfg

    @staticmethod
    def fit(x, t, y, cfg: OutcomeConfig) -> "BoostedStumpsOutcome":
        scaler = Standardizer.fit(x)
        xs = scaler.apply(x)
        if cfg.per_arm:
            ensembles = {}
            for arm in (0, 1):
                mask = t == arm
                if not mask.any():
                    raise EmptyArm(f"treatment arm {arm} is empty in the training indices")
                ensembles[arm] = _StumpEnsemble.fit(
                    xs[mask], y[mask], cfg.rounds, cfg.learning_rate
                )
            return BoostedStumpsOutcome(ensembles, scaler, True, cfg)
        design = np.hstack([xs, t[:, None].astype(np.float64)])
        ens = _StumpEnsemble.fit(design, y, cfg.rounds, cfg.learning_rate)
        return BoostedStumpsOutcome(ens, scaler, False, cfg)

    def predict(self, x, t):
        xs = self.scaler.apply(np.atleast_2d(x))
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (xs.shape[0],))
        if self.per_arm:
            p0 = self.ensembles[0].predict(xs)
            p1 = self.ensembles[1].predict(xs)
            return np.where(t == 1, p1, p0)
        design = np.hstack([xs, t[:, None]])
        return self.ensembles.predict(design)

    @property
    def loss_path(self):
        if self.per_arm:
            return {arm: ens.loss_path for arm, ens in self.ensembles.items()}
        return self.ensembles.loss_path

    def to_json(self):
        def dump(ens):
            return {
                "base": ens.base,
                "learning_rate": ens.learning_rate,
                "stumps": [list(s) for s in ens.stumps],
            }

        doc = {
            "model": "outcome_gbstumps",
            "per_arm": self.per_arm,
            "scaler_mean": self.scaler.mean.tolist(),
            "scaler_std": self.scaler.std.tolist(),
        }
        if self.per_arm:
            doc["arm0"] = dump(self.ensembles[0])
            doc["arm1"] = dump(self.ensembles[1])
        else:
            doc["ensemble"] = dump(self.ensembles)
        return json.dumps(doc)


def outcome_from_json(text: str) -> OutcomeModel:
    doc = json.loads(text)
    kind = doc["model"]
    if kind == "outcome_mean":
        return MeanOutcome(doc["mean"])
    scaler = Standardizer(np.asarray(doc["scaler_mean"]), np.asarray(doc["scaler_std"]))
    if kind == "outcome_ridge":
        if doc["per_arm"]:
            coef = {0: np.asarray(doc["coef0"]), 1: np.asarray(doc["coef1"])}
        else:
            coef = np.asarray(doc["coef"])
        return RidgeOutcome(coef, scaler, doc["per_arm"])
    if kind == "outcome_gbstumps":
        def load(sub):
            return _StumpEnsemble(
                sub["base"],
                sub["learning_rate"],
                [tuple(s) for s in sub["stumps"]],
                (),
            )

        cfg = OutcomeConfig()
        if doc["per_arm"]:
            ens = {0: load(doc["arm0"]), 1: load(doc["arm1"])}
        else:
            ens = load(doc["ensemble"])
        return BoostedStumpsOutcome(ens, scaler, doc["per_arm"], cfg)
    raise ValidationError(f"unknown model document {kind!r}")


def fit_outcome(ds: Dataset, idx: np.ndarray | None = None,
                cfg: OutcomeConfig = OutcomeConfig()) -> OutcomeModel:
    """Fit the potential-outcome model mu_hat(x, t) on the units in ``idx``."""
    if idx is None:
        idx = np.arange(ds.n)
    idx = np.asarray(idx)
    if idx.size == 0:
        raise ValidationError("training indices are empty")
    x, t, y = ds.x[idx], ds.t[idx], ds.y[idx]
    if cfg.misspecified:
        return MeanOutcome(np.mean(y))
    if cfg.learner == "linear":
        return RidgeOutcome.fit(x, t, y, cfg)
    return BoostedStumpsOutcome.fit(x, t, y, cfg)


# ---------------------------------------------------------------------------
# Cross-fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NuisanceSpec:
    """Everything needed to fit one propensity/outcome pair."""

    basis: str = "polynomial2"
    propensity_ridge: float = 1e-3
    clip: tuple[float, float] = DEFAULT_CLIP
    propensity_misspecified: bool = False
    outcome: OutcomeConfig = field(default_factory=OutcomeConfig)

    def with_misspecified(self, propensity: bool = False, outcome: bool = False):
        out = replace(self.outcome, misspecified=outcome)
        return replace(self, propensity_misspecified=propensity, outcome=out)


@dataclass(frozen=True)
class NuisancePair:
    """A fitted propensity/outcome pair and the indices it was fitted on."""

    propensity: PropensityModel
    outcome: OutcomeModel
    fitted_on: np.ndarray
    fold: int = -1


def fit_pair(ds: Dataset, idx: np.ndarray, spec: NuisanceSpec, seed: int = 0,
             fold: int = -1) -> NuisancePair:
    basis = "intercept" if spec.propensity_misspecified else spec.basis
    prop = fit_propensity(
        ds, idx, basis=basis, reg=spec.propensity_ridge, clip=spec.clip, seed=seed
    )
    outcome = fit_outcome(ds, idx, spec.outcome)
    return NuisancePair(prop, outcome, np.asarray(idx), fold)


def cross_fit(
    ds: Dataset,
    folds: FoldAssignment,
    spec: NuisanceSpec = NuisanceSpec(),
    seed: int = 0,
    within_fold: bool = False,
) -> list[NuisancePair]:
    """Fit one nuisance pair per fold.

    By default the pair for fold j is fitted on the complement of fold j, so
    scoring a unit with its own fold's pair never touches data it was fitted
    on.  ``within_fold`` instead fits each pair on the fold itself.
    Fitting errors are re-raised annotated with the fold index.
    """
    pairs = []
    for fold in range(folds.k):
        idx = folds.indices(fold) if within_fold else folds.complement(fold)
        try:
            pairs.append(fit_pair(ds, idx, spec, seed=seed, fold=fold))
        except (ValidationError, DegenerateDesign) as exc:
            raise type(exc)(f"fold {fold}: {exc}") from exc
    return pairs


def _design(xs):
    return np.hstack([np.ones((xs.shape[0], 1)), xs])


def _ridge_solve(design, y, ridge):
    pen = np.full(design.shape[1], ridge)
    pen[0] = 0.0
    try:
        return np.linalg.solve(design.T @ design + np.diag(pen), design.T @ y)
    except np.linalg.LinAlgError:
        raise DegenerateDesign("singular least-squares system") from None


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
