"""Kernel selection: numba-accelerated by default, pure numpy on request.

Set OBSDX_KERNELS=numpy to force the fallback path (useful where numba is
unavailable or for A/B benchmarking; see benchmarks/bench_kernels.py).
OBSDX_KERNELS=numba insists on numba and raises if it cannot be imported.
The flag is read once at import time.
"""

import os
import warnings

from . import _kernels_numpy

BACKEND = "numpy"
_active = _kernels_numpy

_requested = os.environ.get("OBSDX_KERNELS", "").strip().lower()
if _requested not in ("", "numpy", "numba"):
    raise ValueError(f"OBSDX_KERNELS must be 'numpy' or 'numba', got {_requested!r}")

if _requested in ("", "numba"):
    try:
        from . import _kernels_numba

        _active = _kernels_numba
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn("numba unavailable; falling back to pure-numpy kernels")

contrastive_probs = _active.contrastive_probs
pool_log_mean = _active.pool_log_mean
rank_auroc = _active.rank_auroc
gnb_log_odds = _active.gnb_log_odds


def warmup() -> None:
    """Trigger JIT compilation up front; a no-op on the numpy path."""
    if BACKEND == "numba":
        _active.warmup()


def available_backends() -> dict:
    """Importable kernel modules keyed by name, for benchmarks and tests."""
    backends = {"numpy": _kernels_numpy}
    try:
        from . import _kernels_numba

        backends["numba"] = _kernels_numba
    except ImportError:
        pass
    return backends
