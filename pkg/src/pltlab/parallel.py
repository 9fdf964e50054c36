"""Row-parallel execution of the compiled kernels.

Kernels release the GIL, so a thread pool is enough.  Results depend only on
the rows, never on the number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "PLTLAB_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_rows(fn, states: np.ndarray, threads: int | None = None):
    """Apply ``fn`` to row chunks of ``states`` and stack the outputs row-wise.

    ``fn`` returns an array or a tuple of arrays whose first axis indexes rows.
    """
    threads = threads or default_threads()
    n = states.shape[0]
    if threads == 1 or n < 2 * threads:
        return fn(np.ascontiguousarray(states))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    chunks = [np.ascontiguousarray(states[a:b]) for a, b in zip(bounds, bounds[1:])]
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(fn, chunks))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p, axis=0) for p in zip(*parts))
    return np.concatenate(parts, axis=0)
