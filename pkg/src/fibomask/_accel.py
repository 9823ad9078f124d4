"""Numba switch.

Set ``FIBO_NO_NUMBA=1`` to force the pure-numpy kernels. Numba is optional;
when it cannot be imported the numpy path is used automatically.
"""
import os

_DISABLED = os.environ.get("FIBO_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False

numba_default = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
    "boundscheck": False,
}


def njit(fn):
    """Compile ``fn`` with numba when available, otherwise return it untouched."""
    if _njit is None:
        return fn
    return _njit(**numba_default)(fn)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
