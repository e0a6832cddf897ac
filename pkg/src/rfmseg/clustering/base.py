from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PointSet:
    """n points in d dimensions with aligned entity ids."""

    points: np.ndarray
    ids: tuple

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        if len(self.ids) != pts.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for {pts.shape[0]} points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", tuple(self.ids))

    @classmethod
    def from_array(cls, points, ids: Sequence | None = None) -> "PointSet":
        pts = np.asarray(points, dtype=np.float64)
        if ids is None:
            ids = range(pts.shape[0]) if pts.ndim == 2 else ()
        return cls(pts, tuple(ids))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, index) -> "PointSet":
        index = np.asarray(index)
        return PointSet(self.points[index], tuple(self.ids[i] for i in index))


def as_points(data) -> PointSet:
    if isinstance(data, PointSet):
        return data
    return PointSet.from_array(data)
