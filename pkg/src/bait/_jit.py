"""Numba switch.

Set ``BAIT_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is read
once at import time.
"""
import os

_DISABLED = os.environ.get("BAIT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED

jit_kwargs = {"cache": True, "fastmath": False, "nogil": True}


def njit(fn):
    """Compile ``fn`` with numba when available, else return it untouched."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(**jit_kwargs)(fn)
