"""JIT dispatch layer.

Hot numeric kernels in this package are decorated with :func:`njit`.  By
default they compile with numba; setting the environment variable
``FRACLAT_NUMBA=0`` (before import) selects a pure-Python/NumPy fallback
with identical semantics.  ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

_flag = os.environ.get("FRACLAT_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")

try:
    import numba as _numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    _HAVE_NUMBA = False

JIT_ENABLED = NUMBA_REQUESTED and _HAVE_NUMBA


def njit(func=None, **kwargs):
    """numba.njit when enabled, identity decorator otherwise."""
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        if func is None:
            return _numba.njit(**kwargs)
        return _numba.njit(**kwargs)(func)
    if func is None:
        return lambda f: f
    return func
