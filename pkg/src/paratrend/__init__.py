"""Testing and clustering time series by parallelism of their nonparametric trends."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .bandwidth import BandedCovariance, GCVSelection, estimate_autocovariance, gcv_score, select_bandwidth
from .clustering import Cluster, ClusterConfig, ClusteringResult, ClusterState, cluster_all, contributions, find_cluster
from .errors import ConfigError, InputError, NumericalError, ParatrendError, SingularDesignError, StageError
from .kernels import (
    EPANECHNIKOV,
    TRUNCATED_GAUSSIAN,
    HatMatrix,
    KernelSpec,
    SmootherWeights,
    hat_matrix,
    kstar,
    kstar2,
    local_linear_weights,
    moment_sums,
    smooth_series,
)
from .longrun import LongRunVarianceFn, WindowParams, local_autocov, longrun_from_residuals, longrun_g, neighborhood
from .panel import PooledSeries, PreprocessOptions, ResidualPanel, TimeSeriesPanel, center, load_panel, pooled, residuals
from .parallelism import (
    NullSampler,
    ParallelismIndex,
    TestConfig,
    TestOutcome,
    TrendEstimates,
    delta_hat,
    delta_index,
    estimate_trends,
    normal_diagnostic,
    run_test,
    simulate_null,
)
from .simulation import SimModel, StudySettings, acceptance_study, generate_panel, power_study

__all__ = [name for name in dir() if not name.startswith("_")]
