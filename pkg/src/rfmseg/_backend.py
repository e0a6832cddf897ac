"""Kernel backend selection.

The hot loops (k-means assignment, radius-neighbour search, DBSCAN expansion,
agglomerative merging) exist twice: a numba ``@njit`` version and a
numpy/scipy version.  The numba path is used when numba imports cleanly and
``RFMSEG_DISABLE_NUMBA`` is not set to a truthy value.  The flag is read once,
at import time.
"""
from __future__ import annotations

import os

_FLAG = "RFMSEG_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


def _numba_importable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA: bool = _numba_requested() and _numba_importable()
BACKEND: str = "numba" if USE_NUMBA else "numpy"
