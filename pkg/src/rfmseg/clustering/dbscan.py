"""Density-based clustering with a reserved noise label.

A point is *core* when at least ``min_points`` points (itself included) lie
within ``eps``.  Clusters grow from core points in ascending index order;
a border point joins the first cluster whose expansion reaches it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .base import as_points

NOISE = -1
CORE, BORDER, NOISE_KIND = "core", "border", "noise"


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_points: int

    def __post_init__(self):
        if not (self.eps > 0 and np.isfinite(self.eps)):
            raise ValueError(f"eps must be a positive finite radius, got {self.eps!r}")
        if int(self.min_points) != self.min_points or self.min_points < 1:
            raise ValueError(f"min_points must be an integer >= 1, got {self.min_points!r}")
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "min_points", int(self.min_points))


@dataclass(frozen=True)
class DbscanResult:
    labels: np.ndarray
    is_core: np.ndarray
    params: DbscanParams

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def point_kind(self) -> list:
        return [
            CORE if c else (NOISE_KIND if lab == NOISE else BORDER)
            for c, lab in zip(self.is_core.tolist(), self.labels.tolist())
        ]

    @property
    def noise_mask(self) -> np.ndarray:
        return self.labels == NOISE

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_clusters)


def neighbor_graph(points, eps: float):
    """CSR (indptr, indices) of all pairs within ``eps``, self included."""
    ps = as_points(points)
    return _kernels.radius_neighbors(ps.points, float(eps))


def _fit_from_graph(indptr, indices, params: DbscanParams) -> DbscanResult:
    is_core = np.diff(indptr) >= params.min_points
    labels = _kernels.dbscan_expand(indptr, indices, is_core)
    labels.setflags(write=False)
    is_core.setflags(write=False)
    return DbscanResult(labels=labels, is_core=is_core, params=params)


def dbscan_fit(points, params: DbscanParams) -> DbscanResult:
    indptr, indices = neighbor_graph(points, params.eps)
    return _fit_from_graph(indptr, indices, params)


@dataclass(frozen=True)
class SweepRow:
    eps: float
    min_points: int
    clusters: int
    noise_fraction: float
    largest_cluster_size: int
    median_cluster_size: float


def dbscan_param_sweep(points, eps_grid, minpts_grid) -> list:
    """Cluster count, noise share and size summary for every (eps, min_points).

    The neighbour graph is built once per eps and reused across min_points.
    Picking a row is left to the operator.
    """
    ps = as_points(points)
    eps_grid = list(eps_grid)
    minpts_grid = list(minpts_grid)
    if not eps_grid or not minpts_grid:
        raise ValueError("eps and min_points grids must be non-empty")
    rows = []
    for eps in eps_grid:
        indptr, indices = neighbor_graph(ps, eps)
        for mp in minpts_grid:
            res = _fit_from_graph(indptr, indices, DbscanParams(eps, mp))
            sizes = res.cluster_sizes()
            rows.append(
                SweepRow(
                    eps=float(eps),
                    min_points=int(mp),
                    clusters=res.n_clusters,
                    noise_fraction=float(res.noise_mask.sum()) / ps.n,
                    largest_cluster_size=int(sizes.max()) if sizes.size else 0,
                    median_cluster_size=float(np.median(sizes)) if sizes.size else 0.0,
                )
            )
    return rows
