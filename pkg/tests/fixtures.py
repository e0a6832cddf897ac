"""Shared synthetic fixtures and the sweep-row rule used by Model 2 tests."""
import numpy as np

from rfmseg.clustering import DbscanParams, PointSet, dbscan_param_sweep
from rfmseg.synthetic import bimodal_blobs, dense_plus_outliers, four_blobs

EPS_GRID = [round(0.1 * i, 1) for i in range(2, 13)]
MINPTS_GRID = [3, 5, 8, 10, 15, 20]


def pointset(pts):
    width = len(str(len(pts)))
    return PointSet.from_array(pts, ids=[f"C{i:0{width}d}" for i in range(len(pts))])


def sweep_pick(points, expected_noise, clusters=2):
    """Row with the wanted cluster count whose noise share is closest to the planted one."""
    rows = [r for r in dbscan_param_sweep(points, EPS_GRID, MINPTS_GRID) if r.clusters == clusters]
    best = min(rows, key=lambda r: (abs(r.noise_fraction - expected_noise), r.eps, r.min_points))
    return DbscanParams(best.eps, best.min_points)


def outlier_fixture(seed=0, n=1000, gap=5.0):
    pts, truth = dense_plus_outliers(n, gap=gap, seed=seed)
    return pointset(pts), truth


def bimodal_fixture(seed=0, n=2000):
    pts, truth = bimodal_blobs(n, seed=seed)
    return pointset(pts), truth


def blob_fixture(seed=0, n=4000):
    pts, truth = four_blobs(n, seed=seed)
    return pointset(pts), truth


def noise_share(truth):
    return float(np.mean(np.asarray(truth) >= 2))


def rich_raw_rfm(n=2000, seed=0):
    """Independent uniform RFM columns; frequency 1..40 keeps every quintile non-empty."""
    rng = np.random.default_rng(seed)
    freq = rng.integers(1, 41, size=n)
    return np.column_stack([
        rng.integers(1, 366, size=n),
        freq,
        rng.integers(10_000, 10_000_000, size=n),
    ]).astype(np.int64)
