"""Bottom-up agglomerative clustering and dendrogram serialisation.

Node references follow the usual linkage-matrix convention: leaves are
``0..n-1`` and the cluster created by merge ``m`` is ``n + m``.  Each merge
picks the smallest linkage distance; ties go to the lexicographically
smallest (left, right) node pair with ``left < right``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .base import as_points

LINKAGES = ("single", "complete", "average", "ward")
DEFAULT_LINKAGE = "ward"
DEFAULT_SIZE_CAP = 20_000


class TooLargeError(ValueError):
    """Raised when agglomerative clustering is asked to handle too many points."""


@dataclass(frozen=True)
class MergeTree:
    leaves: tuple
    left: np.ndarray
    right: np.ndarray
    height: np.ndarray
    size: np.ndarray

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def merges(self) -> list:
        return list(zip(self.left.tolist(), self.right.tolist(), self.height.tolist(), self.size.tolist()))

    def cut(self, n_clusters: int) -> np.ndarray:
        """Labels after applying the first ``n - n_clusters`` merges.

        Groups are numbered by their smallest leaf index.
        """
        n = self.n
        if not (1 <= n_clusters <= n):
            raise ValueError(f"n_clusters must be in [1, {n}], got {n_clusters}")
        parent = np.arange(2 * n - 1)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for m in range(n - n_clusters):
            parent[find(int(self.left[m]))] = n + m
            parent[find(int(self.right[m]))] = n + m
        roots = np.array([find(i) for i in range(n)])
        _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return rank[inverse]

    def to_linkage_matrix(self) -> np.ndarray:
        """scipy-style ``(n-1) x 4`` matrix, handy for plotting."""
        return np.column_stack([self.left, self.right, self.height, self.size]).astype(np.float64)


def agglomerative_fit(points, n_clusters: int, linkage: str = DEFAULT_LINKAGE,
                      size_cap: int | None = DEFAULT_SIZE_CAP):
    """Full merge tree plus the flat labels at ``n_clusters`` groups."""
    ps = as_points(points)
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; choose from {', '.join(LINKAGES)}")
    if not (1 <= n_clusters <= ps.n):
        raise ValueError(f"n_clusters must be in [1, {ps.n}], got {n_clusters}")
    if size_cap is not None and ps.n > size_cap:
        raise TooLargeError(
            f"agglomerative clustering refused for n={ps.n} > cap {size_cap}: "
            f"cost grows as O(n^3) time and O(n^2) memory; raise the cap explicitly "
            f"or use k-means/DBSCAN"
        )
    if ps.n == 1:
        empty_i = np.empty(0, dtype=np.int64)
        tree = MergeTree(ps.ids, empty_i, empty_i.copy(), np.empty(0), empty_i.copy())
    else:
        left, right, height, size = _kernels.agglomerate(np.array(ps.points), LINKAGES.index(linkage))
        tree = MergeTree(ps.ids, left, right, height, size)
    return tree.cut(n_clusters), tree


def _leaf_json(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def dendrogram_to_json(tree: MergeTree) -> str:
    doc = {
        "leaves": [_leaf_json(v) for v in tree.leaves],
        "merges": [
            {"left": int(l), "right": int(r), "height": float(h), "size": int(s)}
            for l, r, h, s in tree.merges
        ],
    }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def dendrogram_from_json(text: str) -> MergeTree:
    doc = json.loads(text)
    merges = doc["merges"]
    n = len(doc["leaves"])
    if n and len(merges) != n - 1:
        raise ValueError(f"dendrogram with {n} leaves must have {n - 1} merges, found {len(merges)}")
    return MergeTree(
        leaves=tuple(doc["leaves"]),
        left=np.array([m["left"] for m in merges], dtype=np.int64),
        right=np.array([m["right"] for m in merges], dtype=np.int64),
        height=np.array([m["height"] for m in merges], dtype=np.float64),
        size=np.array([m["size"] for m in merges], dtype=np.int64),
    )
