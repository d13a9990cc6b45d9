"""Optional numba acceleration.

Set ``REDNET_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of the
jitted ones. The flag is read once at import time.
"""
import os

_FLAG = os.environ.get("REDNET_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """``numba.njit(cache=True)`` when available, otherwise ``func`` unchanged."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
