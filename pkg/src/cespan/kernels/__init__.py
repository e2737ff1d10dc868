"""Hot numeric kernels with two interchangeable backends.

The numba backend is the default whenever numba imports cleanly; set
``CESPAN_KERNELS=numpy`` to force the pure-numpy fallback (or ``numba`` to
make a missing numba an error instead of a silent fallback). Both backends
run the same operations in the same order; see benchmarks/bench_kernels.py
for the speed comparison.
"""

from __future__ import annotations

import os

_CHOICE = os.environ.get("CESPAN_KERNELS", "auto").strip().lower()

if _CHOICE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"CESPAN_KERNELS={_CHOICE!r}: expected auto, numba or numpy"
    )

if _CHOICE == "numpy":
    from . import _numpy as _impl
else:
    try:
        from . import _numba as _impl
    except ImportError:
        if _CHOICE == "numba":
            raise
        from . import _numpy as _impl

BACKEND = _impl.BACKEND
segment_mean_forward = _impl.segment_mean_forward
segment_mean_backward = _impl.segment_mean_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
viterbi_path = _impl.viterbi_path


def warmup() -> None:
    """Precompile the active backend (no-op for numpy)."""
    fn = getattr(_impl, "warmup", None)
    if fn is not None:
        fn()
