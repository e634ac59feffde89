"""Local lag-window estimates of the long-run variance function g(u)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConfigError, NumericalError
from .kernels import as_kernel, check_bandwidth, hat_matrix
from .panel import TimeSeriesPanel

DEFAULT_TAU = 0.05
DEFAULT_RHO = 0.3
DEFAULT_GRID_SIZE = 101
DEFAULT_LRV_BANDWIDTH = 0.05
FLOOR_REL = 1e-6
_TOL = 1e-12
# below this the residual smoother has eaten most of the local variance
MIN_LEAKAGE_NORM = 0.05


@dataclass(frozen=True)
class WindowParams:
    """Window half-width ``tau`` and truncation factor ``rho`` (lag cap floor(T tau rho))."""

    tau: float = DEFAULT_TAU
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not 0.0 < self.tau <= 0.5:
            raise ConfigError(f"tau must lie in (0, 0.5], got {self.tau}")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")

    def K_T(self, T: int) -> int:
        return int(math.floor(T * self.tau * self.rho + _TOL))

    def validate(self, T: int) -> None:
        if T * self.tau < 4.0 - 1e-9:
            raise ConfigError(f"window too narrow: T*tau = {T * self.tau:.3g} < 4")


def default_grid(size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    if size < 2:
        raise ConfigError("grid needs at least two points")
    return np.linspace(0.0, 1.0, int(size))


def _bounds(T: int, tau: float, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """0-based inclusive index bounds of the windows around each point."""
    t = np.arange(1, T + 1) / float(T)
    lo = np.searchsorted(t, points - tau - _TOL, side="left")
    hi = np.searchsorted(t, points + tau + _TOL, side="right") - 1
    return lo, hi


def neighborhood(T: int, tau: float, u: float) -> np.ndarray:
    """1-based indices t with |t/T - u| <= tau (boundary inclusive)."""
    lo, hi = _bounds(T, tau, np.array([float(u)]))
    if hi[0] < lo[0]:
        raise ConfigError(f"empty window at u={u}")
    return np.arange(lo[0] + 1, hi[0] + 2)


def _check_windows(lo, hi, K: int) -> np.ndarray:
    n = hi - lo + 1
    if np.any(n < K + 2):
        raise ConfigError(f"window of {int(n.min())} points too small for lags up to {K}")
    return n


def local_autocov(errors, params: WindowParams, u: float, k: int, center: bool = False) -> float:
    """Window sample autocovariance at lag k, averaged across series."""
    E = np.atleast_2d(np.asarray(errors, dtype=float))
    T = E.shape[1]
    k = abs(int(k))
    if k > params.K_T(T):
        raise ConfigError(f"lag {k} exceeds truncation lag {params.K_T(T)}")
    idx = neighborhood(T, params.tau, u) - 1
    n = idx.size
    if n <= k + 1:
        raise ConfigError(f"window of {n} points too small for lag {k}")
    W = E[:, idx]
    if center:
        W = W - W.mean(axis=1, keepdims=True)
    return float(((W[:, : n - k] * W[:, k:]).sum(axis=1) / (n - k)).mean())


def _lag_window_sum(P: np.ndarray, lo, hi, K: int, correction=None) -> np.ndarray:
    """sum_{|k|<=K} of window lag-k sums divided by (n - k).

    ``P[k, t]`` holds the averaged product at (t, t + k). ``correction(k)``
    returns the centering term subtracted from each raw window sum.
    """
    n = hi - lo + 1
    g = np.zeros(lo.shape[0])
    for k in range(K + 1):
        C = np.concatenate(([0.0], np.cumsum(P[k])))
        raw = C[hi - k + 1] - C[lo]
        if correction is not None:
            raw = raw - correction(k)
        g += (1.0 if k == 0 else 2.0) * raw / (n - k)
    return g


def _raw_functional(E: np.ndarray, lo, hi, K: int, center: bool) -> np.ndarray:
    P = _backend.lagged_products(np.ascontiguousarray(E, dtype=np.float64), K)
    if not center:
        return _lag_window_sum(P, lo, hi, K)
    n = hi - lo + 1
    C = np.concatenate((np.zeros((E.shape[0], 1)), np.cumsum(E, axis=1)), axis=1)
    m = (C[:, hi + 1] - C[:, lo]) / n
    m2 = (m * m).mean(axis=0)

    def corr(k):
        A = C[:, hi - k + 1] - C[:, lo]
        B = C[:, hi + 1] - C[:, lo + k]
        return (m * (A + B)).mean(axis=0) - (n - k) * m2

    return _lag_window_sum(P, lo, hi, K, corr)


def _matrix_functional(A: np.ndarray, lo, hi, K: int, center: bool) -> np.ndarray:
    """Expected raw functional of A @ z for white unit-variance z."""
    T = A.shape[0]
    P = T * _backend.lagged_products(np.ascontiguousarray(A.T), K)
    if not center:
        return _lag_window_sum(P, lo, hi, K)
    M = A @ A.T
    S = np.zeros((T + 1, T + 1))
    S[1:, 1:] = M.cumsum(axis=0).cumsum(axis=1)

    def rect(r0, r1, c0, c1):  # inclusive 0-based ranges
        return S[r1 + 1, c1 + 1] - S[r0, c1 + 1] - S[r1 + 1, c0] + S[r0, c0]

    n = hi - lo + 1
    rww = rect(lo, hi, lo, hi) / (n * n)

    def corr(k):
        cross = rect(lo, hi, lo, hi - k) + rect(lo, hi, lo + k, hi)
        return cross / n - (n - k) * rww

    return _lag_window_sum(P, lo, hi, K, corr)


@dataclass(frozen=True)
class LongRunVarianceFn:
    grid: np.ndarray
    values: np.ndarray
    sigma2: float
    floor_applied: bool = False

    @classmethod
    def from_values(cls, grid, values, floor_rel: float | None = FLOOR_REL) -> "LongRunVarianceFn":
        grid = np.asarray(grid, dtype=float).copy()
        v = np.asarray(values, dtype=float).copy()
        applied = False
        if floor_rel is not None:
            level = floor_rel * max(float(v.max()), 0.0)
            applied = bool(np.any(v < level))
            v = np.maximum(v, level)
        grid.setflags(write=False)
        v.setflags(write=False)
        return cls(grid=grid, values=v, sigma2=float(np.mean(v * v)), floor_applied=applied)

    def at(self, u) -> np.ndarray:
        """Linear interpolation of the grid values."""
        return np.interp(np.asarray(u, dtype=float), self.grid, self.values)

    def scaled(self, c: float) -> "LongRunVarianceFn":
        return LongRunVarianceFn.from_values(self.grid, c * self.values, None)


def longrun_g(
    errors,
    params: WindowParams | None = None,
    grid=None,
    center: bool = False,
    floor_rel: float | None = FLOOR_REL,
) -> LongRunVarianceFn:
    """Estimate g on ``grid`` from an N x T matrix of errors."""
    params = params or WindowParams()
    E = np.atleast_2d(np.asarray(errors, dtype=float))
    T = E.shape[1]
    params.validate(T)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    K = params.K_T(T)
    lo, hi = _bounds(T, params.tau, grid)
    _check_windows(lo, hi, K)
    return LongRunVarianceFn.from_values(grid, _raw_functional(E, lo, hi, K, center), floor_rel)


def leakage_factor(kernel, T: int, b: float, params: WindowParams, grid, center: bool = False) -> np.ndarray:
    """Fraction of a white process's windowed lag sum that survives detrending at bandwidth b."""
    A = np.eye(T) - hat_matrix(kernel, T, b).entries
    lo, hi = _bounds(T, params.tau, np.asarray(grid, dtype=float))
    return _matrix_functional(A, lo, hi, params.K_T(T), center)


def longrun_from_residuals(
    panel: TimeSeriesPanel,
    kernel=None,
    b: float | None = None,
    params: WindowParams | None = None,
    grid=None,
    center: bool = False,
    leakage_correction: bool = True,
    demean: bool = False,
    floor_rel: float | None = FLOOR_REL,
) -> LongRunVarianceFn:
    """g estimated from detrending residuals at bandwidth ``b`` (default 0.05).

    With ``leakage_correction`` each grid value is divided by the share of a
    white process's lag-window sum that survives the detrending operator.
    ``demean`` removes the cross-sectional mean first (and rescales by N/(N-1)).
    """
    kernel = as_kernel(kernel)
    params = params or WindowParams()
    T = panel.T
    b = check_bandwidth(T, DEFAULT_LRV_BANDWIDTH if b is None else b)
    params.validate(T)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    K = params.K_T(T)
    lo, hi = _bounds(T, params.tau, grid)
    _check_windows(lo, hi, K)

    X = panel.values
    if demean:
        X = X - X.mean(axis=0, keepdims=True)
    A = np.eye(T) - hat_matrix(kernel, T, b).entries
    R = X @ A.T
    g = _raw_functional(R, lo, hi, K, center)
    if leakage_correction:
        norm = _matrix_functional(A, lo, hi, K, center)
        if np.min(norm) < MIN_LEAKAGE_NORM:
            raise NumericalError(
                f"detrending at b={b} removes too much of the local variance "
                f"(retained share {np.min(norm):.3f}); increase the residual bandwidth"
            )
        g = g / norm
    if demean:
        g = g * panel.N / (panel.N - 1)
    return LongRunVarianceFn.from_values(grid, g, floor_rel)
