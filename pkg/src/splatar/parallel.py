"""Thread-count control for the compiled kernels and BLAS calls.

The requested count is clamped to what the machine exposes; results are
byte-identical across thread counts by construction (see _kernels).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numba
from threadpoolctl import threadpool_limits

THREADS_ENV = "SPLATAR_THREADS"


def resolve_threads(requested: int | None = None) -> int:
    """Requested count, else the SPLATAR_THREADS env var, else numba's
    default; always clamped to [1, hardware threads]."""
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        requested = int(env) if env else numba.config.NUMBA_NUM_THREADS
    return max(1, min(int(requested), numba.config.NUMBA_NUM_THREADS))


@contextmanager
def thread_limit(threads: int | None):
    """Apply a thread count to numba prange kernels and BLAS, restoring the
    previous numba setting on exit. ``None`` keeps ambient settings."""
    if threads is None:
        yield
        return
    n = resolve_threads(threads)
    prev = numba.get_num_threads()
    numba.set_num_threads(n)
    try:
        with threadpool_limits(limits=n):
            yield
    finally:
        numba.set_num_threads(prev)
