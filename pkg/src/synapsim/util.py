"""Seed handling and the replica-level worker pool."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def rng_from(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed))


def replica_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """n independent child streams; deterministic in (seed, n-th child)."""
    if isinstance(seed, np.random.SeedSequence):
        return seed.spawn(n)
    return np.random.SeedSequence(seed).spawn(n)


def keyed_seed(seed: int, *key: int) -> np.random.SeedSequence:
    """Stream addressed by an integer tuple, independent of call order."""
    return np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def parallel_map(fn: Callable, args: Sequence, workers: int = 1) -> list:
    """Order-preserving map over replica jobs.

    Results come back in argument order regardless of scheduling, so any
    reduction downstream is deterministic.
    """
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as ex:
        return list(ex.map(fn, args))
