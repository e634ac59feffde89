"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``."""

from __future__ import annotations

import numpy as np

EPANECHNIKOV = 0
TRUNCATED_GAUSSIAN = 1


def _kernel(code: int, v: np.ndarray, norm: float) -> np.ndarray:
    inside = np.abs(v) <= 1.0
    if code == EPANECHNIKOV:
        vals = 0.75 * (1.0 - v * v)
    else:
        vals = norm * np.exp(-0.5 * v * v)
    return np.where(inside, vals, 0.0)


def local_linear_weights(T: int, b: float, points: np.ndarray, code: int, norm: float):
    t = np.arange(1, T + 1) / float(T)
    d = points[:, None] - t[None, :]
    k = _kernel(code, d / b, norm)
    s0 = k.sum(axis=1)
    s1 = (d * k).sum(axis=1)
    s2 = (d * d * k).sum(axis=1)
    det = s2 * s0 - s1 * s1
    singular = (s0 <= 0.0) | (det <= 1e-12 * s0 * s2)
    if singular.any():
        return np.zeros((len(points), T)), int(np.flatnonzero(singular)[0])
    w = k * (s2[:, None] - d * s1[:, None]) / det[:, None]
    return w, -1


def lagged_products(E: np.ndarray, K: int) -> np.ndarray:
    N, T = E.shape
    out = np.zeros((K + 1, T))
    for k in range(K + 1):
        out[k, : T - k] = (E[:, : T - k] * E[:, k:]).sum(axis=0) / N
    return out


def ma_filter(eps: np.ndarray, rho: np.ndarray, J: int) -> np.ndarray:
    T = rho.shape[0]
    acc = eps[:, 0:T].copy()
    for j in range(J - 1, -1, -1):
        acc = acc * rho + eps[:, J - j : J - j + T]
    return acc
