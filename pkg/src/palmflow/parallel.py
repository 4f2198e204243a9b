"""Deterministic replica streams and a bounded worker pool.

Replica ``r`` of stream ``name`` in experiment ``experiment`` draws from a
Philox generator keyed by ``SeedSequence(seed, spawn_key=(crc(experiment),
crc(name), r))``.  Replica sizes never depend on the worker count, so results
are bit-identical for any ``jobs``.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

REPLICA_SIZE = 10_000


def _crc(s: str) -> int:
    return zlib.crc32(s.encode("utf-8"))


def stream(seed: int, experiment: str, name: str, replica: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(_crc(experiment), _crc(name), int(replica)))
    return np.random.Generator(np.random.Philox(ss))


def split(n: int, size: int = REPLICA_SIZE) -> list[int]:
    if n < 1:
        raise ValueError("samples must be positive")
    full, rest = divmod(n, size)
    return [size] * full + ([rest] if rest else [])


def default_jobs() -> int:
    return max(1, int(os.environ.get("PALMFLOW_JOBS", "1")))


def _run_one(task):
    fn, seed, experiment, name, r, count = task
    return fn(stream(seed, experiment, name, r), count)


def run_replicas(
    fn: Callable,
    n: int,
    seed: int,
    experiment: str,
    name: str,
    jobs: int = 1,
    replica_size: int = REPLICA_SIZE,
) -> list:
    """Call ``fn(rng, count)`` per replica; results come back in replica order."""
    tasks = [(fn, seed, experiment, name, r, c) for r, c in enumerate(split(n, replica_size))]
    if jobs <= 1 or len(tasks) == 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_run_one, tasks))
