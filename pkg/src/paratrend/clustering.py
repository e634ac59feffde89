"""Greedy search for maximal groups of series with parallel trends.

A working set is tested; on rejection its largest contributors to the
statistic are dropped and the test repeats. When a test accepts after a
batch of more than one removal, the previous set is restored and a batch of
half the size is removed instead, until single removals settle the boundary.
Each accepted set becomes a cluster and the search restarts on the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, StageError
from .longrun import LongRunVarianceFn
from .panel import TimeSeriesPanel
from .parallelism import StatisticOperator, TestConfig, TestEngine


@dataclass(frozen=True)
class ClusterConfig:
    """``n_remove=None`` means max(1, floor(N / 20)). ``removal='bottom'`` drops
    the smallest contributors instead of the largest."""

    test: TestConfig = field(default_factory=TestConfig)
    n_remove: int | None = None
    removal: str = "top"

    def batch_size(self, N: int) -> int:
        n = max(1, N // 20) if self.n_remove is None else int(self.n_remove)
        if n < 1:
            raise ConfigError("removal batch size must be at least 1")
        if n >= N:
            raise ConfigError(f"removal batch size {n} must be smaller than N={N}")
        return n

    def validate(self, N: int) -> "ClusterConfig":
        if self.removal not in ("top", "bottom"):
            raise ConfigError("removal must be 'top' or 'bottom'")
        self.test.validate()
        self.batch_size(N)
        return self

    def echo(self) -> dict:
        return {"test": self.test.echo(), "n_remove": self.n_remove, "removal": self.removal}


@dataclass
class ClusterState:
    """Search state for one cluster: working set U, step k, group l, flag F, batch n."""

    working_set: list[int]
    k: int = 0
    l: int = 0
    F: int = 0
    n_current: int = 1
    previous: list[int] | None = None
    history: list[dict] = field(default_factory=list)


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    p_value: float
    delta_hat: float

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class ClusteringResult:
    clusters: list[Cluster]
    unclustered: list[int]
    bandwidth: float
    longrun: LongRunVarianceFn
    n_tests: int
    history: list[list[dict]]

    def record(self, labels=None) -> dict:
        def name(i):
            return labels[i] if labels is not None else i

        return {
            "clusters": [
                {
                    "members": [name(i) for i in c.members],
                    "indices": list(c.members),
                    "size": c.size,
                    "p_value": c.p_value,
                    "delta_hat": c.delta_hat,
                }
                for c in self.clusters
            ],
            "unclustered": [name(i) for i in self.unclustered],
            "bandwidth": self.bandwidth,
            "n_tests": self.n_tests,
        }


def contributions(panel: TimeSeriesPanel, members, kernel=None, b: float = 0.1, grid=None) -> np.ndarray:
    """Per-series terms of the statistic on the subset; they sum to the subset statistic."""
    sub = np.asarray(panel.values)[list(members)]
    return StatisticOperator.build(kernel, panel.T, b, grid).contributions(sub)


def _ranked(engine: TestEngine, members: list[int]) -> list[int]:
    """Members sorted by ascending contribution; ties keep ascending index order."""
    members = sorted(members)
    d = engine.contributions(members)
    order = np.argsort(d, kind="stable")
    return [members[j] for j in order]


def _drop(engine: TestEngine, members: list[int], n: int, removal: str) -> list[int]:
    ranked = _ranked(engine, members)
    nstar = max(1, min(n, len(members) - 2))
    gone = set(ranked[-nstar:] if removal == "top" else ranked[:nstar])
    return [i for i in sorted(members) if i not in gone]


class _Tester:
    """Memoised p-values so revisited working sets cost nothing."""

    def __init__(self, engine: TestEngine):
        self.engine = engine
        self.memo: dict[tuple[int, ...], tuple[float, float]] = {}
        self.calls = 0

    def __call__(self, members) -> tuple[float, float]:
        key = tuple(sorted(members))
        if key not in self.memo:
            out = self.engine.test(key)
            self.calls += 1
            self.memo[key] = (out.p_value, out.delta_hat)
        return self.memo[key]


def find_cluster(state: ClusterState, engine: TestEngine, config: ClusterConfig, tester=None):
    """Run the search from ``state``; returns (Cluster or None, final state)."""
    tester = tester or _Tester(engine)
    alpha = config.test.alpha
    U = sorted(state.working_set)
    while True:
        if len(U) <= 1:
            state.history.append({"k": state.k, "size": len(U), "action": "stop"})
            state.working_set = U
            return None, state
        try:
            p, delta = tester(U)
        except StageError as exc:
            exc.state = state
            raise
        if p <= alpha:
            if state.F == 1:
                state.n_current = max(1, state.n_current // 2)
            state.history.append({"k": state.k, "size": len(U), "p_value": p, "action": "remove", "n": state.n_current})
            state.previous = U
            U = _drop(engine, U, state.n_current, config.removal)
            state.k += 1
        elif state.k == 0 or state.n_current == 1:
            state.history.append({"k": state.k, "size": len(U), "p_value": p, "action": "accept"})
            state.working_set = U
            return Cluster(tuple(U), p, delta), state
        else:
            state.F = 1
            state.n_current = max(1, state.n_current // 2)
            state.history.append({"k": state.k, "size": len(U), "p_value": p, "action": "backtrack", "n": state.n_current})
            U = _drop(engine, state.previous, state.n_current, config.removal)
        state.working_set = U


def cluster_all(
    panel: TimeSeriesPanel, config: ClusterConfig, longrun: LongRunVarianceFn | None = None
) -> ClusteringResult:
    """Partition the series into accepted clusters plus leftovers.

    Trend projections, the bandwidth and the long-run variance are computed
    once on the full panel; null samples are shared between subsets of equal size.
    """
    config.validate(panel.N)
    engine = TestEngine(panel, config.test, longrun)
    tester = _Tester(engine)
    n0 = config.batch_size(panel.N)
    remaining = list(range(panel.N))
    clusters: list[Cluster] = []
    history = []
    while len(remaining) >= 2:
        state = ClusterState(working_set=remaining, l=len(clusters), n_current=n0)
        cluster, state = find_cluster(state, engine, config, tester)
        history.append(state.history)
        if cluster is None:
            break
        clusters.append(cluster)
        taken = set(cluster.members)
        remaining = [i for i in remaining if i not in taken]
    return ClusteringResult(
        clusters=clusters,
        unclustered=remaining,
        bandwidth=engine.bandwidth,
        longrun=engine.longrun,
        n_tests=tester.calls,
        history=history,
    )


def with_test(config: ClusterConfig, **changes) -> ClusterConfig:
    return replace(config, test=replace(config.test, **changes))
