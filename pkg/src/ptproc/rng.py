"""Deterministic seeding for parallel Monte Carlo.

Replicates are cut into fixed-size blocks.  Block ``b`` of a campaign with
master seed ``s`` draws from a Philox (counter-based) generator keyed by
``SeedSequence(s, spawn_key=(b,))``, so the stream used by any replicate is
a pure function of ``(s, replicate_index)`` and never of the worker count or
scheduling order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK_SIZE = 8192
WORKERS_ENV = "PTPROC_WORKERS"


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def replicate_generator(seed: int, index: int) -> np.random.Generator:
    """Generator for one replicate in path-level (non-batched) campaigns."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1 << 32, index)))
    )


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_blocks(fn: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
               workers: int | None = None, block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Run ``fn(rng, count)`` over replicate blocks and concatenate in block order."""
    if n < 1:
        raise ValueError("replicate count must be >= 1")
    sizes = [min(block_size, n - start) for start in range(0, n, block_size)]
    workers = workers or worker_count()

    def one(b):
        return np.asarray(fn(block_generator(seed, b), sizes[b]))

    if workers == 1 or len(sizes) == 1:
        parts = [one(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    return np.concatenate(parts, axis=0)
