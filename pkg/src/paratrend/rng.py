"""Counter-based random streams.

A stream is named by ``(seed, path)``; ``path`` is a tuple of small integers
that identifies the purpose (null simulation, panel generation, ...). Within a
stream, replicate ``r`` gets a Philox generator whose counter starts at
``r << 192``, so replicate draws never overlap and do not depend on the
order in which replicates are evaluated.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ConfigError

# purpose tags
NULL = 1
PANEL = 2
STUDY = 3


def check_seed(seed) -> int:
    if seed is None:
        raise ConfigError("a seed is required for stochastic computations")
    try:
        s = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}") from None
    if s < 0 or s != seed:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    return s


@lru_cache(maxsize=4096)
def _key(seed: int, path: tuple[int, ...]) -> tuple[int, int]:
    state = np.random.SeedSequence(entropy=seed, spawn_key=path).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def stream_key(seed: int, path: tuple[int, ...]) -> np.ndarray:
    return np.array(_key(check_seed(seed), tuple(int(p) for p in path)), dtype=np.uint64)


def replicate_generator(seed: int, path: tuple[int, ...], index: int) -> np.random.Generator:
    """Generator for replicate ``index`` of stream ``(seed, path)``."""
    key = stream_key(seed, path)
    counter = np.array([0, 0, 0, int(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
