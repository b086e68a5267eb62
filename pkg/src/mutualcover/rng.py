"""Counter-based random streams with worker-independent results.

Samples are grouped in fixed blocks of ``BLOCK_SIZE``. Block ``b`` of a run
keyed by ``seed`` always uses the Philox stream with key ``seed`` and block
index ``b`` in the high word of the counter, so the draws never depend on
how blocks are spread over workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK_SIZE = 1024
_MASK64 = (1 << 64) - 1

T = TypeVar("T")


def block_generator(seed: int, block: int) -> np.random.Generator:
    counter = np.array([0, 0, 0, block & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed & _MASK64, counter=counter))


def block_sizes(n_samples: int) -> list[int]:
    full, rest = divmod(n_samples, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def run_blocks(n_samples: int, seed: int, workers: int,
               fn: Callable[[np.random.Generator, int], T]) -> list[T]:
    """Apply ``fn(generator, size)`` to every block; results in block order."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if workers < 1:
        raise ValueError("workers must be positive")
    sizes = block_sizes(n_samples)
    tasks = [(b, s) for b, s in enumerate(sizes)]

    def one(task):
        b, s = task
        return fn(block_generator(seed, b), s)

    if workers == 1 or len(tasks) == 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, tasks))


def make_cdf(probs: np.ndarray) -> np.ndarray:
    """Cumulative sums pinned to exactly 1 from the last positive entry on."""
    cdf = np.cumsum(probs, dtype=float)
    last = int(np.flatnonzero(np.asarray(probs) > 0)[-1])
    cdf[last:] = 1.0
    return cdf


def inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Indices drawn by inverting a cumulative distribution at uniforms ``u``."""
    idx = np.searchsorted(cdf, u, side="right")
    # u = 1 must not run past the last positive entry
    return np.minimum(idx, np.searchsorted(cdf, 1.0, side="left"))
