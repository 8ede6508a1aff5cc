# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; signatures and semantics match pykern exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()

BACKEND = "compiled"


cdef inline double _sig(double z) nogil:
    cdef double ez
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


def phi_values(const double[::1] logit_p, const double[::1] m0,
               const double[::1] m1, const double[::1] lam, out=None):
    """Per-unit influence values phi = m0 + sigmoid(logit_p + lam) * (m1 - m0)."""
    cdef Py_ssize_t n = logit_p.shape[0]
    if out is None:
        out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _sig(logit_p[i] + lam[i]) * (m1[i] - m0[i]) + m0[i]
    return out


def reward_batch(const double[::1] logit_p, const double[::1] m0,
                 const double[::1] m1, const double[::1] lam,
                 const double[:, ::1] directions, double nu):
    """Summed influence rewards at lam +- nu * d_k for every direction row."""
    cdef Py_ssize_t m = directions.shape[0]
    cdef Py_ssize_t n = directions.shape[1]
    r_plus = np.empty(m, dtype=np.float64)
    r_minus = np.empty(m, dtype=np.float64)
    cdef double[::1] rp = r_plus
    cdef double[::1] rm = r_minus
    cdef Py_ssize_t k, i
    cdef double sp, sm, step, diff
    with nogil:
        for k in range(m):
            sp = 0.0
            sm = 0.0
            for i in range(n):
                step = nu * directions[k, i]
                diff = m1[i] - m0[i]
                sp += m0[i] + _sig(logit_p[i] + (lam[i] + step)) * diff
                sm += m0[i] + _sig(logit_p[i] + (lam[i] - step)) * diff
            rp[k] = sp
            rm[k] = sm
    return r_plus, r_minus


def best_stump(const double[:, ::1] x, const long long[:, ::1] order,
               const double[::1] resid):
    """Best single-split stump under squared loss; see pykern.best_stump."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j
    cdef long long row
    cdef double total = 0.0
    cdef double cs, score, n_left
    cdef double best_score = -INFINITY
    cdef Py_ssize_t best_feat = -1
    cdef double best_thr = 0.0, best_left = 0.0, best_right = 0.0
    cdef double xi, xnext

    for i in range(n):
        total += resid[i]

    with nogil:
        for j in range(d):
            cs = 0.0
            for i in range(n - 1):
                row = order[i, j]
                cs += resid[row]
                xi = x[row, j]
                xnext = x[order[i + 1, j], j]
                if xi == xnext:
                    continue
                n_left = <double> (i + 1)
                score = cs * cs / n_left + (total - cs) * (total - cs) / (n - n_left)
                if score > best_score:
                    best_score = score
                    best_feat = j
                    best_thr = 0.5 * (xi + xnext)
                    best_left = cs / n_left
                    best_right = (total - cs) / (n - n_left)

    if best_feat < 0:
        mean = total / n
        return (-1, 0.0, mean, mean, -INFINITY)
    return (int(best_feat), best_thr, best_left, best_right, best_score)
