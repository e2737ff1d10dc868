"""BLAS thread-pool control.

The model is many small GEMMs interleaved with Python and jitted code;
multi-threaded BLAS pools lose far more to wake-up latency than they gain,
catastrophically so on busy machines. Training, prediction and the
benchmarks pin the pool to one thread. Falls back to a no-op when
threadpoolctl is unavailable (set OPENBLAS_NUM_THREADS=1 instead).
"""

from __future__ import annotations

import contextlib


def single_thread_blas():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=1, user_api="blas")


_PIN = None


def pin_blas_single_thread() -> None:
    """Permanently limit BLAS threads in this process (CLI entry points)."""
    global _PIN
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    if _PIN is None:
        _PIN = threadpool_limits(limits=1, user_api="blas")
