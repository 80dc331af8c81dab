"""numba switch for the recurrent kernels.

Set ``GADGETFORGE_DISABLE_JIT=1`` to run the same kernel source as plain
numpy.  Without numba installed the fallback is used automatically.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("GADGETFORGE_DISABLE_JIT", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

JIT_ENABLED = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def maybe_njit(fn):
    """``numba.njit(cache=True)`` when enabled, identity otherwise.

    The undecorated function stays reachable as ``.py_func`` either way so
    benchmarks can compare both paths in one process.
    """
    if not JIT_ENABLED:
        fn.py_func = fn
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)
