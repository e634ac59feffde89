"""The parallelism statistic, its simulated null distribution and the test pipeline."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rngmod
from .bandwidth import DEFAULT_PILOT_B, GCVSelection, select_bandwidth
from .errors import ConfigError, NumericalError, ParatrendError, StageError
from .kernels import as_kernel, check_bandwidth, design_points, hat_matrix, kstar2, weight_matrix
from .longrun import (
    DEFAULT_LRV_BANDWIDTH,
    DEFAULT_RHO,
    DEFAULT_TAU,
    LongRunVarianceFn,
    WindowParams,
    longrun_from_residuals,
)
from .panel import TimeSeriesPanel
from .parallel import chunk_ranges, pmap

ENGINES = ("direct", "spectral")
SCALES = ("sqrt", "literal")
CHUNK = 250


def evaluation_grid(T: int, grid_size: int | None = None) -> np.ndarray:
    """Design points by default, otherwise ``grid_size`` equispaced points in [0, 1]."""
    if grid_size is None:
        return design_points(T)
    if int(grid_size) < 2:
        raise ConfigError("grid size must be at least 2")
    return np.linspace(0.0, 1.0, int(grid_size))


@dataclass(frozen=True)
class StatisticOperator:
    """Linear map ``D`` with ``D @ (x_i - xbar)`` = mu_i - c_i - mu on the grid.

    ``D = W - 1 hbar^T`` where W holds the smoother weights on the grid and
    hbar is the column mean of the hat matrix (intercepts always use the
    design points). Since ``D @ 1 = 0`` the statistic ignores per-series
    constants; centering across series removes any common signal.
    """

    D: np.ndarray
    grid: np.ndarray
    bandwidth: float

    @classmethod
    def build(cls, kernel, T: int, b: float, grid=None) -> "StatisticOperator":
        kernel = as_kernel(kernel)
        b = check_bandwidth(T, b)
        H = hat_matrix(kernel, T, b).entries
        if grid is None:
            grid, W = design_points(T), H
        else:
            grid = np.asarray(grid, dtype=float)
            W = weight_matrix(kernel, T, b, grid)
        D = W - H.mean(axis=0)[None, :]
        D.setflags(write=False)
        return cls(D=D, grid=grid, bandwidth=b)

    @property
    def G(self) -> int:
        return self.D.shape[0]

    def projections(self, X) -> np.ndarray:
        """Row-wise ``D @ x_i``; each row is computed on its own so results do not depend on N."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([self.D @ x for x in X])

    def contributions_from(self, P: np.ndarray) -> np.ndarray:
        Pc = P - P.mean(axis=0, keepdims=True)
        return np.einsum("ij,ij->i", Pc, Pc) / self.G

    def value_from(self, P: np.ndarray) -> float:
        return float(np.sum(self.contributions_from(P)))

    def contributions(self, X) -> np.ndarray:
        return self.contributions_from(self.projections(X))

    def value(self, X) -> float:
        return self.value_from(self.projections(X))


@dataclass(frozen=True)
class TrendEstimates:
    mu_i_hat: np.ndarray
    mu_hat: np.ndarray
    c_i_hat: np.ndarray
    grid: np.ndarray
    bandwidth: float


def estimate_trends(panel: TimeSeriesPanel, kernel=None, b: float = 0.1, grid=None) -> TrendEstimates:
    kernel = as_kernel(kernel)
    T = panel.T
    b = check_bandwidth(T, b)
    H = hat_matrix(kernel, T, b).entries
    X = panel.values
    if grid is None:
        grid, W = design_points(T), H
    else:
        grid = np.asarray(grid, dtype=float)
        W = weight_matrix(kernel, T, b, grid)
    mu_i = X @ W.T
    fitted = X @ H.T
    c = (fitted - fitted.mean(axis=0, keepdims=True)).mean(axis=1)
    return TrendEstimates(mu_i_hat=mu_i, mu_hat=mu_i.mean(axis=0), c_i_hat=c, grid=grid, bandwidth=b)


def delta_hat(panel: TimeSeriesPanel, kernel=None, b: float = 0.1, grid=None) -> float:
    """Sum over series of the squared L2 distance between mu_i - c_i and mu."""
    return StatisticOperator.build(kernel, panel.T, b, grid).value(panel.values)


@dataclass(frozen=True)
class ParallelismIndex:
    delta_N: float
    minimizing_mu: np.ndarray
    minimizing_c: np.ndarray


def delta_index(mu_list) -> ParallelismIndex:
    """Closed-form minimum over (mu, c) of sum_i int (mu_i - c_i - mu)^2; rows share an equispaced grid."""
    M = np.atleast_2d(np.asarray(mu_list, dtype=float))
    mu = M.mean(axis=0)
    c = (M - mu).mean(axis=1)
    dev = M - c[:, None] - mu[None, :]
    return ParallelismIndex(delta_N=float((dev * dev).mean(axis=1).sum()), minimizing_mu=mu, minimizing_c=c)


# -------------------------------------------------------------- null sampling


def _direct_chunk(args):
    Bt, N, seed, path, lo, hi = args
    T, G = Bt.shape
    out = np.empty(hi - lo)
    for j, r in enumerate(range(lo, hi)):
        Z = rngmod.replicate_generator(seed, path, r).standard_normal((N, T))
        P = Z @ Bt
        P -= P.mean(axis=0, keepdims=True)
        out[j] = np.sum(P * P) / G
    return out


def _spectral_chunk(args):
    lam, N, seed, path, lo, hi = args
    out = np.empty(hi - lo)
    for j, r in enumerate(range(lo, hi)):
        chi = rngmod.replicate_generator(seed, path, r).chisquare(N - 1, size=lam.size)
        out[j] = float(lam @ chi)
    return out


@dataclass(frozen=True)
class NullSampler:
    """Draws of the statistic for surrogate panels s(t/T) Z_it with i.i.d. normal Z.

    ``direct`` simulates surrogate panels literally. ``spectral`` uses the
    exact representation sum_j lambda_j chi2_{N-1}, with lambda the
    eigenvalues of (D S)^T (D S) / G and S = diag(s).
    """

    op: StatisticOperator
    scale: np.ndarray
    engine: str = "direct"
    _lam: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown null engine {self.engine!r}; expected one of {ENGINES}")
        s = np.asarray(self.scale, dtype=float)
        if s.shape != (self.op.D.shape[1],):
            raise ConfigError("surrogate scale must have one value per time point")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise NumericalError("surrogate scale must be finite and non-negative")
        object.__setattr__(self, "scale", s)
        if self.engine == "spectral":
            B = self.op.D * s[None, :]
            lam = np.linalg.eigvalsh(B @ B.T / self.op.G)[::-1]
            top = lam[0] if lam.size else 0.0
            lam = lam[lam > 1e-13 * top] if top > 0 else np.zeros(0)
            object.__setattr__(self, "_lam", np.ascontiguousarray(lam))

    def mean(self, N: int) -> float:
        """Exact expectation of a draw: (N - 1) tr((D S)^T (D S)) / G."""
        B = self.op.D * self.scale[None, :]
        return (N - 1) * float(np.sum(B * B)) / self.op.G

    def sample(self, N: int, n_sims: int, seed: int, workers: int | None = 1, path=(rngmod.NULL,)) -> np.ndarray:
        if N < 2:
            raise ConfigError("null simulation needs N >= 2")
        seed = rngmod.check_seed(seed)
        path = tuple(path)
        if self.engine == "direct":
            payload = np.ascontiguousarray((self.op.D * self.scale[None, :]).T)
            fn = _direct_chunk
        else:
            payload = self._lam
            fn = _spectral_chunk
        jobs = [(payload, int(N), seed, path, a, b) for a, b in chunk_ranges(int(n_sims), CHUNK)]
        return np.sort(np.concatenate(pmap(fn, jobs, workers)))


def surrogate_scale(g_values, mode: str = "sqrt") -> np.ndarray:
    g = np.asarray(g_values, dtype=float)
    if np.any(g < 0):
        raise NumericalError("long-run variance must be non-negative")
    if mode == "sqrt":
        return np.sqrt(g)
    if mode == "literal":
        return g.copy()
    raise ConfigError(f"unknown surrogate scale {mode!r}; expected one of {SCALES}")


def simulate_null(
    g,
    N: int,
    T: int,
    kernel=None,
    b: float = 0.1,
    grid=None,
    n_sims: int = 2000,
    seed: int = 0,
    engine: str = "direct",
    scale_mode: str = "sqrt",
    workers: int | None = 1,
) -> np.ndarray:
    """Sorted simulated null statistics; ``g`` is a LongRunVarianceFn or values at the design points."""
    if int(n_sims) < 100:
        raise ConfigError("n_sims must be at least 100")
    gv = g.at(design_points(T)) if isinstance(g, LongRunVarianceFn) else np.asarray(g, dtype=float)
    op = StatisticOperator.build(kernel, T, b, grid)
    return NullSampler(op, surrogate_scale(gv, scale_mode), engine).sample(N, n_sims, seed, workers)


def p_value(stat: float, null_samples: np.ndarray) -> float:
    null = np.asarray(null_samples)
    return (1.0 + float(np.count_nonzero(null >= stat))) / (1.0 + null.size)


# -------------------------------------------------------- normal diagnostic


@dataclass(frozen=True)
class NormalDiagnostic:
    """Standardised statistic on the asymptotic scale and a self-normalised variant.

    The asymptotic approximation is known to be slow; the simulated null is
    the primary inference route.
    """

    z: float
    p_value: float
    z_self: float
    p_value_self: float
    center: float
    sigma2: float
    kstar2: float


def _two_sided(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def normal_diagnostic(delta, null_samples, g, kernel, b: float, N: int, T: int) -> NormalDiagnostic:
    null = np.asarray(null_samples, dtype=float)
    if null.size == 0:
        raise ConfigError("normal diagnostic needs null samples")
    m = float(null.mean())
    sigma2 = g.sigma2 if isinstance(g, LongRunVarianceFn) else float(g)
    k2 = kstar2(kernel)
    z = T * math.sqrt(b) / math.sqrt(N - 1) * (delta - m) / math.sqrt(sigma2 * k2) if sigma2 > 0 else 0.0
    sd = float(null.std(ddof=1)) if null.size > 1 else 0.0
    zs = (delta - m) / sd if sd > 0 else 0.0
    return NormalDiagnostic(z, _two_sided(z), zs, _two_sided(zs), m, sigma2, k2)


# ------------------------------------------------------------ test pipeline


@dataclass(frozen=True)
class TestConfig:
    """Resolved test settings. ``bandwidth=None`` selects b by GCV."""

    __test__ = False

    bandwidth: float | None = None
    kernel: str = "epanechnikov"
    alpha: float = 0.05
    tau: float = DEFAULT_TAU
    rho: float = DEFAULT_RHO
    n_sims: int = 2000
    seed: int | None = None
    engine: str = "direct"
    surrogate_scale: str = "sqrt"
    lrv_bandwidth: float = DEFAULT_LRV_BANDWIDTH
    lrv_center: bool = False
    leakage_correction: bool = True
    demean: bool = False
    normal_diag: bool = False
    grid_size: int | None = None
    pilot_b: float = DEFAULT_PILOT_B
    bandwidth_grid: tuple[float, ...] | None = None
    band: int | None = None
    workers: int = 1

    def validate(self) -> "TestConfig":
        as_kernel(self.kernel)
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.n_sims) < 100:
            raise ConfigError("n_sims must be at least 100")
        rngmod.check_seed(self.seed)
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown null engine {self.engine!r}")
        if self.surrogate_scale not in SCALES:
            raise ConfigError(f"unknown surrogate scale {self.surrogate_scale!r}")
        WindowParams(self.tau, self.rho)
        return self

    def echo(self) -> dict:
        """Configuration as plain data, without settings that only affect run time."""
        d = asdict(self)
        d.pop("workers")
        if d["bandwidth_grid"] is not None:
            d["bandwidth_grid"] = list(d["bandwidth_grid"])
        return d


@dataclass
class TestOutcome:
    __test__ = False

    delta_hat: float
    null_samples: np.ndarray
    q_alpha: float
    p_value: float
    reject: bool
    alpha: float
    seed: int
    n_sims: int
    bandwidth: float
    N: int
    T: int
    longrun: LongRunVarianceFn
    normal_diag: NormalDiagnostic | None = None
    gcv: GCVSelection | None = None
    trends: TrendEstimates | None = None
    config: TestConfig | None = None

    def record(self) -> dict:
        rec = {
            "delta_hat": self.delta_hat,
            "p_value": self.p_value,
            "q_alpha": self.q_alpha,
            "reject": self.reject,
            "alpha": self.alpha,
            "bandwidth": self.bandwidth,
            "N": self.N,
            "T": self.T,
            "seed": self.seed,
            "n_sims": self.n_sims,
            "null_mean": float(np.mean(self.null_samples)),
            "null_sd": float(np.std(self.null_samples, ddof=1)),
            "sigma2": self.longrun.sigma2,
            "longrun_floor_applied": self.longrun.floor_applied,
        }
        if self.normal_diag is not None:
            rec["normal_diag"] = asdict(self.normal_diag)
        if self.gcv is not None:
            rec["gcv"] = {
                "chosen": self.gcv.chosen,
                "candidates": [float(x) for x in self.gcv.candidate_bandwidths],
                "scores": [None if not np.isfinite(s) else float(s) for s in self.gcv.scores],
            }
        if self.config is not None:
            rec["config"] = self.config.echo()
        return rec


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (ParatrendError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise StageError(name, exc) from exc


class TestEngine:
    """Everything that stays fixed when the test is applied to subsets of one panel.

    Trend projections, the bandwidth and the long-run variance are computed
    once; null samples are cached per subset size.
    """

    __test__ = False

    def __init__(self, panel: TimeSeriesPanel, config: TestConfig, longrun: LongRunVarianceFn | None = None):
        self.panel = panel
        self.config = _stage("config", config.validate)
        self.kernel = as_kernel(config.kernel)
        T = panel.T
        self.gcv = None
        if config.bandwidth is None:
            grid = None if config.bandwidth_grid is None else np.asarray(config.bandwidth_grid)
            self.gcv = _stage(
                "bandwidth", select_bandwidth, panel, self.kernel, grid, config.pilot_b, None, config.band
            )
            self.bandwidth = self.gcv.chosen
        else:
            self.bandwidth = _stage("bandwidth", check_bandwidth, T, config.bandwidth)
        grid = None if config.grid_size is None else evaluation_grid(T, config.grid_size)
        self.op = _stage("trends", StatisticOperator.build, self.kernel, T, self.bandwidth, grid)
        self.projections = _stage("trends", self.op.projections, panel.values)

        if longrun is None:
            longrun = _stage(
                "longrun",
                longrun_from_residuals,
                panel,
                self.kernel,
                config.lrv_bandwidth,
                WindowParams(config.tau, config.rho),
                design_points(T),
                config.lrv_center,
                config.leakage_correction,
                config.demean,
            )
        self.longrun = longrun
        g = longrun.at(design_points(T))
        level = (1e-12 * max(1.0, float(np.max(np.abs(panel.values))))) ** 2
        if not np.max(g) > level:
            # residuals at rounding level: a surrogate null would be pure noise
            raise StageError("longrun", NumericalError("estimated long-run variance is numerically zero"))
        self.sampler = _stage(
            "null", lambda: NullSampler(self.op, surrogate_scale(g, config.surrogate_scale), config.engine)
        )
        self._null_cache: dict[int, np.ndarray] = {}

    def null(self, N: int) -> np.ndarray:
        if N not in self._null_cache:
            c = self.config
            self._null_cache[N] = _stage("null", self.sampler.sample, N, c.n_sims, c.seed, c.workers)
        return self._null_cache[N]

    def contributions(self, members) -> np.ndarray:
        return self.op.contributions_from(self.projections[list(members)])

    def statistic(self, members) -> float:
        return float(np.sum(self.contributions(members)))

    def test(self, members=None) -> TestOutcome:
        c = self.config
        members = list(range(self.panel.N)) if members is None else list(members)
        if len(members) < 2:
            raise StageError("trends", ConfigError("the test needs at least two series"))
        delta = self.statistic(members)
        null = self.null(len(members))
        q = float(np.quantile(null, 1.0 - c.alpha))
        diag = None
        if c.normal_diag:
            diag = normal_diagnostic(
                delta, null, self.longrun, self.kernel, self.bandwidth, len(members), self.panel.T
            )
        return TestOutcome(
            delta_hat=delta,
            null_samples=null,
            q_alpha=q,
            p_value=p_value(delta, null),
            reject=bool(delta > q),
            alpha=c.alpha,
            seed=int(c.seed),
            n_sims=int(c.n_sims),
            bandwidth=self.bandwidth,
            N=len(members),
            T=self.panel.T,
            longrun=self.longrun,
            normal_diag=diag,
            gcv=self.gcv,
            config=c,
        )


def run_test(panel: TimeSeriesPanel, config: TestConfig, longrun: LongRunVarianceFn | None = None) -> TestOutcome:
    """Full pipeline: bandwidth, trends, long-run variance, simulated null, p-value."""
    engine = TestEngine(panel, config, longrun)
    out = engine.test()
    grid = engine.op.grid if config.grid_size is not None else None
    out.trends = estimate_trends(panel, engine.kernel, engine.bandwidth, grid)
    return out
