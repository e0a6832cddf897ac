"""Seeded synthetic data: labelled point clouds for the clustering pipelines
and transaction logs that realise a given RFM cloud."""
from __future__ import annotations

from datetime import date, datetime, time, timedelta, timezone

import numpy as np

from .ingest import RawTransaction


def tetrahedron_centers(edge: float) -> np.ndarray:
    """Four 3-D centres with every pairwise distance equal to ``edge``."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    return v * (edge / (2.0 * np.sqrt(2.0)))


def four_blobs(n: int = 4000, edge: float = 6.0, sigma: float = 0.5, seed: int = 0):
    """Four equal isotropic Gaussian blobs on a regular tetrahedron.

    Equal spacing keeps the WCSS curve's kink at exactly k = 4.
    """
    rng = np.random.default_rng(seed)
    centers = tetrahedron_centers(edge)
    truth = np.arange(n) % 4
    rng.shuffle(truth)
    pts = centers[truth] + rng.normal(scale=sigma, size=(n, 3))
    return pts, truth


def bimodal_blobs(n: int = 2000, edge: float = 8.0, sigma: float = 0.4, split: float = 1.5,
                  seed: int = 0):
    """Four blobs, the first made of two modes ``2 * split`` apart along axis 0.

    Truth has five groups: the two halves of blob 0 are 0 and 4.
    """
    pts, truth = four_blobs(n, edge, sigma, seed)
    rng = np.random.default_rng([seed, 1])
    first = np.nonzero(truth == 0)[0]
    half = rng.random(len(first)) < 0.5
    pts[first, 0] += np.where(half, split, -split)
    truth = truth.copy()
    truth[first[half]] = 4
    return pts, truth


def dense_plus_outliers(n: int = 1000, outlier_frac: float = 0.05, gap: float = 5.0,
                        sigma: float = 0.25, seed: int = 0):
    """Two dense clusters (active / inactive) plus sparse high-value outliers.

    Columns are (recency, frequency, monetary) in standardized units.  The
    outliers sit well above both clusters in frequency and monetary and form
    two groups whose mean recencies differ by ``gap``.  Truth labels: 0, 1
    dense; 2 recent outliers; 3 lapsed outliers.
    """
    rng = np.random.default_rng(seed)
    n_out = int(round(n * outlier_frac))
    n_dense = n - n_out
    dense_centers = np.array([[-1.0, -0.5, -0.5], [1.5, -0.5, -0.5]])
    t_dense = np.arange(n_dense) % 2
    dense = dense_centers[t_dense] + rng.normal(scale=sigma, size=(n_dense, 3))
    t_out = 2 + (np.arange(n_out) % 2)
    rec_center = np.where(t_out == 2, -1.5, -1.5 + gap)
    out = np.column_stack([
        rec_center + rng.normal(scale=0.3, size=n_out),
        rng.uniform(2.5, 6.5, size=n_out),
        rng.uniform(2.5, 6.5, size=n_out),
    ])
    pts = np.vstack([dense, out])
    truth = np.concatenate([t_dense, t_out])
    perm = rng.permutation(n)
    return pts[perm], truth[perm]


def uniform_cube(n: int, density: float = 1.0, d: int = 3, seed: int = 0) -> np.ndarray:
    """Uniform points in a cube sized so the expected points per unit volume is ``density``."""
    side = (n / density) ** (1.0 / d)
    return np.random.default_rng(seed).uniform(0.0, side, size=(n, d))


# ---------------------------------------------------------------- transaction logs

def to_raw_rfm(z: np.ndarray) -> np.ndarray:
    """Map a standardized-looking cloud to plausible raw RFM units.

    recency in days (>= 1), frequency as a count (>= 1), monetary in cents.
    """
    rec = np.clip(np.rint(100.0 + 12.0 * z[:, 0]), 1, None)
    freq = np.clip(np.rint(60.0 + 8.0 * z[:, 1]), 1, None)
    money = np.clip(np.rint((10_000.0 + 1_200.0 * z[:, 2]) * 100.0), freq, None)
    return np.column_stack([rec, freq, money]).astype(np.int64)


def transactions_from_rfm(raw: np.ndarray, end: date = date(2021, 6, 30), seed: int = 0,
                          prefix: str = "C") -> list:
    """Transactions whose RFM features are exactly ``raw`` rows.

    The latest transaction of the whole log falls on ``end`` only if some row
    has recency 1; reference date is taken to be ``end + 1 day``.  Each
    customer's last purchase lands ``recency`` days before that, earlier ones
    are spread over the preceding year, and the monetary total (in cents) is
    split across purchases.
    """
    rng = np.random.default_rng(seed)
    ref = end + timedelta(days=1)
    out = []
    tx = 0
    width = len(str(len(raw)))
    for i, (rec, freq, money) in enumerate(raw.tolist()):
        cid = f"{prefix}{i:0{width}d}"
        last = ref - timedelta(days=int(rec))
        cuts = np.sort(rng.integers(0, money + 1, size=freq - 1))
        parts = np.diff(np.concatenate(([0], cuts, [money])))
        offsets = [0] + sorted(rng.integers(0, 366, size=freq - 1).tolist())
        for off, amt in zip(offsets, parts.tolist()):
            when = datetime.combine(last - timedelta(days=off), time(12, 0), tzinfo=timezone.utc)
            out.append(RawTransaction(cid, f"T{tx:08d}", int(amt), when))
            tx += 1
    order = rng.permutation(len(out))
    return [out[j] for j in order]


def random_transactions(n_customers: int = 500, mean_txns: float = 5.0, days: int = 365,
                        end: date = date(2021, 6, 30), seed: int = 0) -> list:
    """Poisson transaction counts (at least one) with lognormal amounts."""
    rng = np.random.default_rng(seed)
    counts = np.maximum(rng.poisson(mean_txns, size=n_customers), 1)
    out = []
    tx = 0
    width = len(str(n_customers))
    for i, c in enumerate(counts.tolist()):
        cid = f"C{i:0{width}d}"
        for _ in range(c):
            day = end - timedelta(days=int(rng.integers(0, days)))
            when = datetime.combine(day, time(int(rng.integers(0, 24)), int(rng.integers(0, 60))),
                                    tzinfo=timezone.utc)
            cents = int(np.rint(rng.lognormal(mean=8.0, sigma=1.0)))
            out.append(RawTransaction(cid, f"T{tx:08d}", cents, when))
            tx += 1
    return out
