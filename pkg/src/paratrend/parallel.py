"""Order-preserving process-pool map used by the Monte Carlo loops."""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigError

ENV_WORKERS = "PARATREND_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(ENV_WORKERS, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_WORKERS} must be an integer, got {raw!r}") from None
    return resolve_workers(n)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return default_workers()
    workers = int(workers)
    if workers < 1:
        raise ConfigError("worker count must be at least 1")
    return workers


def chunk_ranges(n: int, size: int) -> list[tuple[int, int]]:
    """Fixed partition of range(n); independent of the worker count."""
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def pmap(func, items, workers: int | None = 1) -> list:
    """``[func(x) for x in items]``, possibly across processes, in input order."""
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) <= 1:
        return [func(x) for x in items]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=min(workers, len(items)), mp_context=ctx) as ex:
        return list(ex.map(func, items))
