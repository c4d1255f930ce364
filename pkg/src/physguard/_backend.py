"""Kernel backend selection.

Hot loops are written once in a numba-compatible subset of Python. When numba
is importable and ``PHYSGUARD_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise the same source runs as plain
Python/numpy.
"""

import os

_flag = os.environ.get("PHYSGUARD_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile ``func`` with ``numba.njit(cache=True)`` when enabled."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def python_version(func):
    """Return the uncompiled Python function behind a (possibly) jitted one."""
    return getattr(func, "py_func", func)
