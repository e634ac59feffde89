"""Banded error-covariance estimation and GCV bandwidth selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _backend
from .errors import ConfigError, NumericalError
from .kernels import as_kernel, check_bandwidth, hat_matrix
from .panel import ResidualPanel, TimeSeriesPanel, center, residuals

DEFAULT_PILOT_B = 0.05
DEFAULT_GRID_SIZE = 15
RIDGE_START = 1e-8
RIDGE_CAP = 1e-2
TIE_RTOL = 1e-12


def band_width(T: int) -> int:
    """floor(T^(4/15))."""
    L = int(math.floor(T ** (4.0 / 15.0)))
    # exact integer correction of pow rounding
    while (L + 1) ** 15 <= T**4:
        L += 1
    while L > 0 and L**15 > T**4:
        L -= 1
    return L


@dataclass(frozen=True)
class BandedCovariance:
    """Symmetric banded matrix in lower band storage: ``bands[k, t] = gamma[t + k, t]``."""

    bands: np.ndarray
    band: int
    ridge: float = 0.0

    @property
    def T(self) -> int:
        return self.bands.shape[1]

    def dense(self) -> np.ndarray:
        T = self.T
        G = np.zeros((T, T))
        for k in range(self.band + 1):
            d = self.bands[k, : T - k]
            G[np.arange(k, T), np.arange(T - k)] = d
            G[np.arange(T - k), np.arange(k, T)] = d
        G[np.diag_indices(T)] += self.ridge
        return G

    def rebanded(self, band: int) -> "BandedCovariance":
        band = min(int(band), self.band)
        return BandedCovariance(self.bands[: band + 1].copy(), band, self.ridge)

    def factorize(self) -> "CovarianceFactor":
        """Banded Cholesky; on failure adds a ridge growing tenfold from 1e-8 to 1e-2 of the mean diagonal."""
        scale = float(np.mean(self.bands[0]))
        if not scale > 0.0:
            scale = 1.0
        ridges = [self.ridge] + [
            self.ridge + RIDGE_START * scale * 10.0**j
            for j in range(int(round(math.log10(RIDGE_CAP / RIDGE_START))) + 1)
        ]
        for r in ridges:
            ab = self.bands.copy()
            ab[0] += r
            try:
                cb = linalg.cholesky_banded(ab, lower=True, check_finite=False)
            except linalg.LinAlgError:
                continue
            return CovarianceFactor(cb, BandedCovariance(self.bands, self.band, r))
        raise NumericalError(
            "banded covariance is not positive definite even after the maximal ridge; "
            "a larger pilot bandwidth or a narrower band usually helps"
        )


@dataclass(frozen=True)
class CovarianceFactor:
    chol: np.ndarray
    cov: BandedCovariance

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve_banded((self.chol, True), rhs, check_finite=False)


def estimate_autocovariance(resid, kernel=None, b_cov: float = DEFAULT_PILOT_B, band: int | None = None) -> BandedCovariance:
    """Smoothed lag-k residual products on the shortened design of length T - k, banded at L."""
    kernel = as_kernel(kernel)
    E = resid.residuals if isinstance(resid, ResidualPanel) else np.atleast_2d(np.asarray(resid, dtype=float))
    T = E.shape[1]
    L = band_width(T) if band is None else int(band)
    if L < 0 or L >= T:
        raise ConfigError(f"band width {L} must lie in [0, T)")
    P = _backend.lagged_products(np.ascontiguousarray(E, dtype=np.float64), L)
    bands = np.zeros((L + 1, T))
    for k in range(L + 1):
        n = T - k
        check_bandwidth(n, b_cov)
        W = hat_matrix(kernel, n, b_cov).entries
        bands[k, :n] = W @ P[k, :n]
    return BandedCovariance(bands, L)


def gcv_score(panel: TimeSeriesPanel, kernel, b: float, cov) -> float:
    """Whitened GCV score; ``cov`` is a BandedCovariance or an existing factor."""
    kernel = as_kernel(kernel)
    T = panel.T
    H = hat_matrix(kernel, T, b)
    denom = 1.0 - H.trace / T
    if denom <= 0.0:
        raise NumericalError(f"GCV undefined at b={b}: trace(H) >= T")
    fac = cov if isinstance(cov, CovarianceFactor) else cov.factorize()
    Y = center(panel)
    R = Y @ H.entries.T - Y
    Z = fac.solve(R.T)
    return float(np.sum(R.T * Z) / denom**2)


def default_bandwidth_grid(T: int, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.geomspace(2.0 / T, 0.5, int(size))


@dataclass(frozen=True)
class GCVSelection:
    candidate_bandwidths: np.ndarray
    scores: np.ndarray
    chosen: float
    ridge: float
    band: int


def select_bandwidth(
    panel: TimeSeriesPanel,
    kernel=None,
    grid=None,
    pilot_b: float = DEFAULT_PILOT_B,
    b_cov: float | None = None,
    band: int | None = None,
) -> GCVSelection:
    kernel = as_kernel(kernel)
    T = panel.T
    grid = default_bandwidth_grid(T) if grid is None else np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ConfigError("empty bandwidth grid")
    for b in grid:
        check_bandwidth(T, b)
    res = residuals(panel, kernel, pilot_b)
    cov = estimate_autocovariance(res, kernel, pilot_b if b_cov is None else b_cov, band)
    Y = center(panel)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    if not np.any(np.abs(Yc) > 1e-12 * max(1.0, float(np.max(np.abs(panel.values))))):
        # rows equal up to constants: H reproduces them, so every score is zero
        return GCVSelection(grid, np.zeros(grid.size), float(np.min(grid)), 0.0, cov.band)
    fac = cov.factorize()

    scores = np.full(grid.size, np.nan)
    for j, b in enumerate(grid):
        try:
            scores[j] = gcv_score(panel, kernel, float(b), fac)
        except NumericalError:
            continue
    ok = np.isfinite(scores)
    if not ok.any():
        raise NumericalError("GCV score undefined for every candidate bandwidth")
    scale = float(np.sum(Y.T * fac.solve(Y.T)))
    best = np.nanmin(scores)
    tied = ok & (scores <= best + TIE_RTOL * max(scale, abs(best), 1e-300))
    chosen = float(np.min(grid[tied]))
    return GCVSelection(grid, scores, chosen, fac.cov.ridge, cov.band)


__all__ = [
    "BandedCovariance",
    "CovarianceFactor",
    "GCVSelection",
    "band_width",
    "default_bandwidth_grid",
    "estimate_autocovariance",
    "gcv_score",
    "select_bandwidth",
]
