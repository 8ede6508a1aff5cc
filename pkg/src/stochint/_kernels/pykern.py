"""Numpy reference implementations of the hot kernels.

Same signatures as the compiled module ``_ckern``; used as the fallback
backend and as the ground truth in the backend-equivalence tests.
"""

import numpy as np

BACKEND = "python"


def phi_values(logit_p, m0, m1, lam, out=None):
    """Per-unit influence values phi = m0 + q * (m1 - m0).

    q is the shifted propensity sigmoid(logit_p + lam), i.e. the treatment
    probability after multiplying the odds by exp(lam).  Written in the
    m0-anchored form so that m1 == m0 gives phi == m0 bit-for-bit.
    """
    q = _sigmoid(logit_p + lam)
    if out is None:
        out = np.empty_like(q)
    np.multiply(q, m1 - m0, out=out)
    out += m0
    return out


def reward_batch(logit_p, m0, m1, lam, directions, nu):
    """Summed influence rewards for symmetric perturbations of lam.

    For each row d_k of ``directions`` returns
    (sum_i phi_i(lam + nu*d_k), sum_i phi_i(lam - nu*d_k)).
    """
    step = nu * directions
    diff = m1 - m0
    r_plus = np.sum(m0 + _sigmoid(logit_p + (lam + step)) * diff, axis=1)
    r_minus = np.sum(m0 + _sigmoid(logit_p + (lam - step)) * diff, axis=1)
    return r_plus, r_minus


def best_stump(x, order, resid):
    """Best single-split regression stump under squared loss.

    Parameters
    ----------
    x : (n, d) float64 array of features.
    order : (n, d) int64 array; column j holds argsort(x[:, j]).
    resid : (n,) float64 array of current residuals.

    Returns
    -------
    (feature, threshold, left_value, right_value, score) for the split
    maximizing sum_L^2/n_L + sum_R^2/n_R over all features and cut points.
    Ties go to the lowest feature index, then the lowest cut index.  When
    no feature admits a split (all values constant) feature is -1 and both
    values equal the residual mean.
    """
    n, d = x.shape
    total = float(np.sum(resid))
    best = (-1, 0.0, total / n, total / n, -np.inf)
    for j in range(d):
        idx = order[:, j]
        xs = x[idx, j]
        cut = xs[:-1] != xs[1:]
        if not cut.any():
            continue
        cs = np.cumsum(resid[idx])[:-1]
        n_left = np.arange(1, n, dtype=np.float64)
        score = cs * cs / n_left + (total - cs) * (total - cs) / (n - n_left)
        score[~cut] = -np.inf
        i = int(np.argmax(score))
        if score[i] > best[4]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            left = cs[i] / (i + 1)
            right = (total - cs[i]) / (n - i - 1)
            best = (j, float(thr), float(left), float(right), float(score[i]))
    return best


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
