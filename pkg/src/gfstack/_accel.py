"""Optional numba acceleration.

Hot kernels are written once as plain Python/numpy loops and compiled with
``njit`` when numba is importable. Set ``GFSTACK_DISABLE_NUMBA=1`` to force
the pure-numpy fallback paths (useful for debugging and for the benchmark).
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("GFSTACK_DISABLE_NUMBA", "").strip().lower() in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` with cache/nogil defaults, or identity without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def use_numba():
    """Backend selected for kernel dispatch (re-read so tests can monkeypatch)."""
    return USE_NUMBA


def thread_count():
    """Worker threads from ``STACKNET_THREADS`` (0 or unset means cpu count)."""
    raw = os.environ.get("STACKNET_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
