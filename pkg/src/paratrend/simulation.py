"""Time-varying AR(1) simulation model and the size / power studies built on it."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _backend
from . import rng as rngmod
from .errors import ConfigError
from .kernels import as_kernel, design_points
from .longrun import DEFAULT_LRV_BANDWIDTH, DEFAULT_RHO, DEFAULT_TAU, WindowParams, longrun_from_residuals
from .panel import TimeSeriesPanel
from .parallel import pmap
from .parallelism import NullSampler, StatisticOperator, normal_diagnostic, p_value, surrogate_scale


@dataclass(frozen=True)
class SimModel:
    """X_it = c_i + A sin(2 pi t/T) + [i < ceil(pN)] a D cos(2 pi t/T) + e_it,
    where e_it = sigma sum_{j<=J} rho(t/T)^j eps_{i,t-j}, eps Rademacher, rho(u) = rho0 + rho1 u.
    """

    trend_amplitude: float = 2.0
    rho0: float = 0.2
    rho1: float = -0.3
    sigma: float = 1.0
    distortion_amplitude: float = 2.0
    a: float = 0.0
    p: float = 0.0
    shifts: tuple[float, ...] | None = None
    ma_truncation: int = 64
    recursion: str = "ma"

    def __post_init__(self):
        r = np.array([self.rho0, self.rho0 + self.rho1])
        if np.any(np.abs(r) >= 1.0):
            raise ConfigError("need |rho(u)| < 1 on [0, 1]")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("distorted proportion p must lie in [0, 1]")
        if int(self.ma_truncation) < 1:
            raise ConfigError("MA truncation J must be at least 1")
        if self.recursion not in ("ma", "ar"):
            raise ConfigError("recursion must be 'ma' or 'ar'")

    def rho(self, u):
        return self.rho0 + self.rho1 * np.asarray(u, dtype=float)

    def trend(self, u):
        return self.trend_amplitude * np.sin(2.0 * np.pi * np.asarray(u, dtype=float))

    def distortion(self, u):
        return self.distortion_amplitude * np.cos(2.0 * np.pi * np.asarray(u, dtype=float))

    def true_g(self, u):
        """sigma^2 / (1 - rho(u))^2."""
        return self.sigma**2 / (1.0 - self.rho(u)) ** 2

    def n_distorted(self, N: int) -> int:
        return int(math.ceil(self.p * N - 1e-12))


def generate_errors(model: SimModel, N: int, T: int, gen: np.random.Generator) -> np.ndarray:
    J = int(model.ma_truncation)
    eps = (2.0 * gen.integers(0, 2, size=(N, T + J)) - 1.0) * model.sigma
    rho = np.ascontiguousarray(model.rho(design_points(T)))
    if model.recursion == "ma":
        return np.asarray(_backend.ma_filter(np.ascontiguousarray(eps), rho, J))
    # plain time-varying recursion started J steps early
    e = np.zeros(N)
    rho_ext = np.concatenate((np.full(J, rho[0]), rho))
    out = np.empty((N, T))
    for t in range(T + J):
        e = rho_ext[t] * e + eps[:, t]
        if t >= J:
            out[:, t - J] = e
    return out


def generate_panel(model: SimModel, N: int, T: int, seed: int, index: int = 0, path=(rngmod.PANEL,)) -> TimeSeriesPanel:
    """Panel number ``index`` of the stream ``(seed, path)``."""
    if T < 4 or N < 2:
        raise ConfigError("need N >= 2 and T >= 4")
    gen = rngmod.replicate_generator(seed, path, index)
    u = design_points(T)
    X = model.trend(u)[None, :] + generate_errors(model, N, T, gen)
    nd = model.n_distorted(N)
    if nd and model.a != 0.0:
        X[:nd] += model.a * model.distortion(u)[None, :]
    if model.shifts is not None:
        c = np.asarray(model.shifts, dtype=float)
        if c.shape != (N,):
            raise ConfigError("shifts must have one value per series")
        X += c[:, None]
    return TimeSeriesPanel(X)


# ------------------------------------------------------------------ studies


@dataclass(frozen=True)
class StudySettings:
    """Shared settings of the Monte Carlo studies.

    ``g_mode='true'`` feeds the model's g to the null simulation, ``'estimated'``
    uses the residual-based estimate from each replicate.
    """

    alpha: float = 0.05
    g_mode: str = "true"
    engine: str = "spectral"
    kernel: str = "epanechnikov"
    tau: float = DEFAULT_TAU
    rho: float = DEFAULT_RHO
    lrv_bandwidth: float = DEFAULT_LRV_BANDWIDTH
    surrogate_scale: str = "sqrt"
    normal_diag: bool = False

    def __post_init__(self):
        if self.g_mode not in ("true", "estimated"):
            raise ConfigError("g_mode must be 'true' or 'estimated'")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")


def _replicate_job(args):
    model, N, T, b, inner_sims, seed, cell, lo, hi, st = args
    kernel = as_kernel(st.kernel)
    op = StatisticOperator.build(kernel, T, b)
    u = design_points(T)
    fixed = None
    if st.g_mode == "true":
        fixed = NullSampler(op, surrogate_scale(model.true_g(u), st.surrogate_scale), st.engine)
    rows = []
    for r in range(lo, hi):
        panel = generate_panel(model, N, T, seed, r, path=(rngmod.STUDY, cell, 0))
        delta = op.value(panel.values)
        if fixed is None:
            g = longrun_from_residuals(panel, kernel, st.lrv_bandwidth, WindowParams(st.tau, st.rho), u)
            sampler = NullSampler(op, surrogate_scale(g.values, st.surrogate_scale), st.engine)
            sigma2 = g.sigma2
        else:
            sampler = fixed
            sigma2 = float(np.mean(model.true_g(u) ** 2))
        null = sampler.sample(N, inner_sims, seed, 1, path=(rngmod.STUDY, cell, 1 + r))
        q = float(np.quantile(null, 1.0 - st.alpha))
        row = [delta, q, p_value(delta, null), float(delta > q)]
        if st.normal_diag:
            d = normal_diagnostic(delta, null, sigma2, kernel, b, N, T)
            row += [d.z, d.z_self]
        rows.append(row)
    return np.array(rows)


def run_replicates(
    model: SimModel,
    N: int,
    T: int,
    b: float,
    outer_reps: int,
    inner_sims: int,
    seed: int,
    settings: StudySettings | None = None,
    cell: int = 0,
    workers: int | None = 1,
    chunk: int = 25,
) -> dict:
    """Per-replicate statistic, critical value, p-value, rejection flag (and z-values)."""
    st = settings or StudySettings()
    seed = rngmod.check_seed(seed)
    if int(outer_reps) < 1 or int(inner_sims) < 100:
        raise ConfigError("need outer_reps >= 1 and inner_sims >= 100")
    jobs = [
        (model, N, T, b, int(inner_sims), seed, cell, a, min(a + chunk, outer_reps), st)
        for a in range(0, int(outer_reps), chunk)
    ]
    M = np.vstack(pmap(_replicate_job, jobs, workers))
    out = {"delta": M[:, 0], "q": M[:, 1], "p_value": M[:, 2], "reject": M[:, 3].astype(bool)}
    if st.normal_diag:
        out["z"], out["z_self"] = M[:, 4], M[:, 5]
    return out


def mc_se(alpha: float, reps: int) -> float:
    return math.sqrt(alpha * (1.0 - alpha) / reps)


def acceptance_study(
    cells,
    outer_reps: int = 500,
    inner_sims: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    settings: StudySettings | None = None,
    model: SimModel | None = None,
    workers: int | None = 1,
) -> list[dict]:
    """Acceptance rate under the null for each (T, N, b) cell."""
    st = replace(settings or StudySettings(), alpha=alpha)
    model = model or SimModel()
    if int(outer_reps) < 100:
        raise ConfigError("outer_reps must be at least 100")
    table = []
    for j, (T, N, b) in enumerate(cells):
        res = run_replicates(model, int(N), int(T), float(b), outer_reps, inner_sims, seed, st, cell=j, workers=workers)
        table.append(
            {
                "T": int(T),
                "N": int(N),
                "b": float(b),
                "acceptance": float(1.0 - res["reject"].mean()),
                "mc_se": mc_se(alpha, outer_reps),
                "outer_reps": int(outer_reps),
                "inner_sims": int(inner_sims),
                "g_mode": st.g_mode,
            }
        )
    return table


def power_study(
    T: int,
    N: int,
    pairs,
    b: float = 0.4,
    outer_reps: int = 500,
    inner_sims: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    settings: StudySettings | None = None,
    model: SimModel | None = None,
    workers: int | None = 1,
) -> list[dict]:
    """Rejection rate for each (p, a) distortion setting.

    All settings reuse the same error and null draws, so differences between
    them reflect the distortion only.
    """
    st = replace(settings or StudySettings(), alpha=alpha)
    base = model or SimModel()
    if int(outer_reps) < 100:
        raise ConfigError("outer_reps must be at least 100")
    rows = []
    for p, a in pairs:
        m = replace(base, p=float(p), a=float(a))
        res = run_replicates(m, int(N), int(T), float(b), outer_reps, inner_sims, seed, st, cell=0, workers=workers)
        rej = float(res["reject"].mean())
        rows.append(
            {
                "p": float(p),
                "a": float(a),
                "T": int(T),
                "N": int(N),
                "b": float(b),
                "rejection": rej,
                "mc_se": math.sqrt(max(rej * (1 - rej), alpha * (1 - alpha)) / outer_reps),
                "outer_reps": int(outer_reps),
                "inner_sims": int(inner_sims),
                "g_mode": st.g_mode,
            }
        )
    return rows


def model_record(model: SimModel) -> dict:
    d = asdict(model)
    if d["shifts"] is not None:
        d["shifts"] = list(d["shifts"])
    return d
