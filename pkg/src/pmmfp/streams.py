"""Counter-based random streams keyed by ``(seed, *indices)``.

Each replicate gets its own Philox stream, so results do not depend on the
order in which worker threads pick up replicates.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "PMMFP_THREADS"

# Spawn-key tags separating the streams used by different procedures.
TAG_BOOTSTRAP = 1
TAG_SELECTION = 2
TAG_MONTE_CARLO = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def default_threads() -> int:
    """Worker count from ``PMMFP_THREADS``, else 1."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(func, items, threads: int | None = None) -> list:
    """``list(map(func, items))``, threaded when ``threads > 1``; order is preserved."""
    threads = default_threads() if threads is None else max(1, int(threads))
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
