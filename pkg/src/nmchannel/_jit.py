"""Numba switch.

Set ``NMCHANNEL_DISABLE_JIT=1`` before import to force the pure-numpy
kernels; the flag is also honoured when numba is not installed.
"""
import os

_DISABLED = os.environ.get("NMCHANNEL_DISABLE_JIT", "0").lower() in ("1", "true", "yes")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
