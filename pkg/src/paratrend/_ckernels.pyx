# cython: language_level=3
"""Compiled inner loops. Each function has a numpy twin in ``_kernels_py``."""

import numpy as np

from libc.math cimport exp, floor, ceil

cdef int EPANECHNIKOV = 0
cdef int TRUNCATED_GAUSSIAN = 1


cdef inline double _kernel(int code, double v, double norm) noexcept nogil:
    if v < -1.0 or v > 1.0:
        return 0.0
    if code == EPANECHNIKOV:
        return 0.75 * (1.0 - v * v)
    return norm * exp(-0.5 * v * v)


def local_linear_weights(Py_ssize_t T, double b, double[::1] points, int code, double norm):
    """Dense (G, T) matrix of local linear weights; second value is the first
    singular evaluation index, or -1."""
    cdef Py_ssize_t G = points.shape[0]
    out = np.zeros((G, T), dtype=np.float64)
    cdef double[:, ::1] w = out
    cdef Py_ssize_t g, t, lo, hi
    cdef double u, d, k, s0, s1, s2, det
    cdef double fT = <double>T
    cdef Py_ssize_t bad = -1
    with nogil:
        for g in range(G):
            u = points[g]
            lo = <Py_ssize_t>floor((u - b) * fT) - 1
            hi = <Py_ssize_t>ceil((u + b) * fT) + 1
            if lo < 1:
                lo = 1
            if hi > T:
                hi = T
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            for t in range(lo, hi + 1):
                d = u - t / fT
                k = _kernel(code, d / b, norm)
                s0 += k
                s1 += d * k
                s2 += d * d * k
            det = s2 * s0 - s1 * s1
            if s0 <= 0.0 or det <= 1e-12 * s0 * s2:
                bad = g
                break
            for t in range(lo, hi + 1):
                d = u - t / fT
                k = _kernel(code, d / b, norm)
                w[g, t - 1] = k * (s2 - d * s1) / det
    return out, bad


def lagged_products(double[:, ::1] E, Py_ssize_t K):
    """P[k, t] = mean_i E[i, t] * E[i, t + k] for t < T - k, zero elsewhere."""
    cdef Py_ssize_t N = E.shape[0], T = E.shape[1]
    out = np.zeros((K + 1, T), dtype=np.float64)
    cdef double[:, ::1] P = out
    cdef Py_ssize_t i, k, t
    with nogil:
        for k in range(K + 1):
            for i in range(N):
                for t in range(T - k):
                    P[k, t] += E[i, t] * E[i, t + k]
            for t in range(T - k):
                P[k, t] = P[k, t] / N
    return out


def ma_filter(double[:, ::1] eps, double[::1] rho, Py_ssize_t J):
    """e[i, t] = sum_{j=0..J} rho[t]**j * eps[i, t + J - j], by Horner's rule."""
    cdef Py_ssize_t N = eps.shape[0], T = rho.shape[0]
    out = np.empty((N, T), dtype=np.float64)
    cdef double[:, ::1] e = out
    cdef Py_ssize_t i, t, j
    cdef double acc, r
    with nogil:
        for i in range(N):
            for t in range(T):
                r = rho[t]
                acc = eps[i, t]
                for j in range(J - 1, -1, -1):
                    acc = acc * r + eps[i, t + J - j]
                e[i, t] = acc
    return out
