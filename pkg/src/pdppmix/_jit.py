"""Numba switch.

Set ``PDPPMIX_DISABLE_NUMBA=1`` to run every hot kernel as plain Python/numpy.
The flag is read once, at import time.
"""

import os

DISABLED = os.environ.get("PDPPMIX_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLED


def jit(fn=None, *, fallback=None):
    """Compile ``fn`` with ``numba.njit`` or return the fallback.

    ``fallback`` is a vectorised numpy implementation with the same signature;
    when omitted, the undecorated function itself serves as the fallback.
    """

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(cache=True)(f)
        return fallback if fallback is not None else f

    if fn is None:
        return wrap
    return wrap(fn)
