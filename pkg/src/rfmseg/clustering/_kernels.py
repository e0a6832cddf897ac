"""Dispatch to the numba or numpy kernel set (see ``rfmseg._backend``)."""
from __future__ import annotations

from .._backend import BACKEND, USE_NUMBA

if USE_NUMBA:
    from ._kernels_numba import (
        agglomerate,
        assign,
        cluster_sums,
        dbscan_expand,
        point_dist2,
        radius_neighbors,
    )
else:
    from ._kernels_numpy import (  # type: ignore[assignment]
        agglomerate,
        assign,
        cluster_sums,
        dbscan_expand,
        point_dist2,
        radius_neighbors,
    )

__all__ = [
    "BACKEND",
    "agglomerate",
    "assign",
    "cluster_sums",
    "dbscan_expand",
    "point_dist2",
    "radius_neighbors",
]
