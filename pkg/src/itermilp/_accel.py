"""Numba switch for the hot kernels.

Set ``ITERMILP_DISABLE_NUMBA=1`` to run every kernel as plain numpy code.
Both paths execute the same source; numba only removes interpreter overhead.
"""
import os

_FLAG = os.environ.get("ITERMILP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_ENABLED = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba (cached) or return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def maybe_njit(fn):
    """``njit`` when the accelerated path is active, identity otherwise."""
    return njit(fn) if NUMBA_ENABLED else fn
