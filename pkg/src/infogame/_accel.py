"""Numba switch for the hot kernels.

Kernels in :mod:`infogame.kernels` exist twice: an explicit-loop version
compiled with ``numba.njit`` and a vectorised pure-numpy version.  Which one
the public dispatchers use is decided once, at import time:

* ``INFOGAME_DISABLE_NUMBA=1`` forces the numpy path;
* otherwise numba is used when it imports cleanly.
"""
from __future__ import annotations

import os

_FALSEY = {"", "0", "false", "no", "off"}


def _env_disabled() -> bool:
    return os.environ.get("INFOGAME_DISABLE_NUMBA", "0").strip().lower() not in _FALSEY


try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    The jitted objects are always built if numba is installed so that the
    equivalence tests can compare both paths in one process; ``USE_NUMBA``
    only controls dispatch.
    """
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
