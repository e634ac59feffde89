"""Kernels, local linear weights, hat matrices and kernel convolution constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _backend
from .errors import ConfigError, SingularDesignError

_KINDS = {"epanechnikov": 0, "truncated_gaussian": 1}
_ALIASES = {
    "epa": "epanechnikov",
    "epanechnikov": "epanechnikov",
    "gauss": "truncated_gaussian",
    "gaussian": "truncated_gaussian",
    "truncated_gaussian": "truncated_gaussian",
    "truncatedgaussian": "truncated_gaussian",
}
# 1 / (sqrt(2 pi) * (Phi(1) - Phi(-1)))
_TG_NORM = 1.0 / (math.sqrt(2.0 * math.pi) * math.erf(1.0 / math.sqrt(2.0)))


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel supported on [-1, 1] that integrates to one."""

    kind: str = "epanechnikov"

    def __post_init__(self):
        key = _ALIASES.get(self.kind.lower().replace("-", "_"))
        if key is None:
            raise ConfigError(f"unknown kernel {self.kind!r}; expected one of {sorted(_KINDS)}")
        object.__setattr__(self, "kind", key)

    @property
    def code(self) -> int:
        return _KINDS[self.kind]

    @property
    def norm(self) -> float:
        return _TG_NORM if self.kind == "truncated_gaussian" else 1.0

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "epanechnikov":
            out = 0.75 * (1.0 - v * v)
        else:
            out = _TG_NORM * np.exp(-0.5 * v * v)
        out = np.where(np.abs(v) <= 1.0, out, 0.0)
        return out if out.ndim else float(out)


EPANECHNIKOV = KernelSpec("epanechnikov")
TRUNCATED_GAUSSIAN = KernelSpec("truncated_gaussian")


def as_kernel(kernel) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    if kernel is None:
        return EPANECHNIKOV
    return KernelSpec(str(kernel))


def check_bandwidth(T: int, b: float) -> float:
    """Validate a bandwidth for a series of length ``T``; returns ``float(b)``."""
    b = float(b)
    if not (b > 0.0 and b <= 1.0) or not math.isfinite(b):
        raise ConfigError(f"bandwidth must lie in (0, 1], got {b}")
    if T * b < 2.0 - 1e-9:
        raise ConfigError(f"bandwidth {b} too small for T={T}: need T*b >= 2")
    return b


def design_points(T: int) -> np.ndarray:
    """The design grid t/T for t = 1..T."""
    return np.arange(1, T + 1) / float(T)


def moment_sums(kernel, T: int, b: float, u: float) -> tuple[float, float, float]:
    """Local moment sums S_j(u) = sum_t (u - t/T)^j K((u - t/T)/b), j = 0, 1, 2."""
    kernel = as_kernel(kernel)
    b = check_bandwidth(T, b)
    if not 0.0 <= u <= 1.0:
        raise ConfigError(f"evaluation point {u} outside [0, 1]")
    d = u - design_points(T)
    d = d[np.abs(d) <= b]
    k = kernel(d / b)
    s0, s1, s2 = float(k.sum()), float((d * k).sum()), float((d * d * k).sum())
    if s0 <= 0.0 or s2 * s0 - s1 * s1 <= 1e-12 * s0 * s2:
        raise SingularDesignError(f"singular local design at u={u} (T={T}, b={b})")
    return s0, s1, s2


@dataclass(frozen=True)
class SmootherWeights:
    u: float
    weights: np.ndarray
    moment_sums: tuple[float, float, float]


def weight_matrix(kernel, T: int, b: float, points) -> np.ndarray:
    """Rows are local linear weight vectors w_b(., u) for each u in ``points``."""
    kernel = as_kernel(kernel)
    b = check_bandwidth(T, b)
    pts = np.ascontiguousarray(points, dtype=np.float64).ravel()
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ConfigError("evaluation points must lie in [0, 1]")
    w, bad = _backend.local_linear_weights(int(T), b, pts, kernel.code, kernel.norm)
    if bad >= 0:
        raise SingularDesignError(f"singular local design at u={pts[bad]} (T={T}, b={b})")
    return np.asarray(w)


def local_linear_weights(kernel, T: int, b: float, u: float) -> SmootherWeights:
    sums = moment_sums(kernel, T, b, u)
    w = weight_matrix(kernel, T, b, [u])[0]
    return SmootherWeights(u=float(u), weights=w, moment_sums=sums)


def smooth_series(kernel, T: int, b: float, series, grid=None) -> np.ndarray:
    """Local linear fit of one series (or each row of a 2-D array) on ``grid``.

    ``grid`` defaults to the design points.
    """
    y = np.asarray(series, dtype=float)
    if y.shape[-1] != T:
        raise ConfigError(f"series length {y.shape[-1]} does not match T={T}")
    W = hat_matrix(kernel, T, b).entries if grid is None else weight_matrix(kernel, T, b, grid)
    return y @ W.T


@dataclass(frozen=True)
class HatMatrix:
    entries: np.ndarray
    bandwidth: float
    kernel: KernelSpec
    trace: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "trace", float(np.trace(self.entries)))

    @property
    def T(self) -> int:
        return self.entries.shape[0]


@lru_cache(maxsize=64)
def _cached_hat(kernel: KernelSpec, T: int, b: float) -> HatMatrix:
    H = weight_matrix(kernel, T, b, design_points(T))
    H.setflags(write=False)
    return HatMatrix(entries=H, bandwidth=b, kernel=kernel)


def hat_matrix(kernel, T: int, b: float) -> HatMatrix:
    """T x T smoother matrix; row t' holds the weights at u = t'/T. Cached, read-only."""
    return _cached_hat(as_kernel(kernel), int(T), check_bandwidth(T, b))


def kstar(kernel, x: float) -> float:
    """K*(x): integral of K(v) K(v + 2|x|) over [-1, 1 - 2|x|]."""
    kernel = as_kernel(kernel)
    x = abs(float(x))
    if x >= 1.0:
        return 0.0
    val, _ = integrate.quad(
        lambda v: kernel(v) * kernel(v + 2.0 * x), -1.0, 1.0 - 2.0 * x, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return float(val)


@lru_cache(maxsize=8)
def _kstar2(kernel: KernelSpec) -> float:
    # K* is even and smooth apart from x = 0; integrate over [0, 1] and double
    val, _ = integrate.quad(lambda x: kstar(kernel, x) ** 2, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * float(val)


def kstar2(kernel) -> float:
    """K2* = integral of K*(x)^2 over [-1, 1]."""
    return _kstar2(as_kernel(kernel))
