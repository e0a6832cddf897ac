"""Clustering primitives over dense point sets (Euclidean distance)."""
from ._kernels import BACKEND
from .base import PointSet, as_points
from .dbscan import NOISE, DbscanParams, DbscanResult, SweepRow, dbscan_fit, dbscan_param_sweep, neighbor_graph
from .hierarchy import (
    DEFAULT_LINKAGE,
    DEFAULT_SIZE_CAP,
    LINKAGES,
    MergeTree,
    TooLargeError,
    agglomerative_fit,
    dendrogram_from_json,
    dendrogram_to_json,
)
from .kmeans import ElbowCurve, KMeansModel, elbow_curve, kmeans_best_of, kmeans_fit, knee_index, wcss

__all__ = [
    "BACKEND",
    "DEFAULT_LINKAGE",
    "DEFAULT_SIZE_CAP",
    "LINKAGES",
    "NOISE",
    "DbscanParams",
    "DbscanResult",
    "ElbowCurve",
    "KMeansModel",
    "MergeTree",
    "PointSet",
    "SweepRow",
    "TooLargeError",
    "agglomerative_fit",
    "as_points",
    "dbscan_fit",
    "dbscan_param_sweep",
    "dendrogram_from_json",
    "dendrogram_to_json",
    "elbow_curve",
    "kmeans_best_of",
    "kmeans_fit",
    "knee_index",
    "neighbor_graph",
    "wcss",
]
