"""Lloyd's k-means with k-means++ seeding, plus the elbow curve."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .base import as_points

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 300


@dataclass(frozen=True)
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    wcss: float
    iterations: int
    seed: int | None
    converged: bool
    # WCSS after each (assign, update) round
    trace: tuple = field(default=(), repr=False)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def _fsum(values: np.ndarray) -> float:
    # exactly rounded, so per-iteration comparisons are not polluted by summation order
    return math.fsum(values.tolist())


def wcss(points, centroids, assignments) -> float:
    """Sum of squared distances from each point to the centroid it is assigned to."""
    pts = as_points(points).points
    cents = np.ascontiguousarray(np.asarray(centroids, dtype=np.float64))
    labels = np.ascontiguousarray(np.asarray(assignments, dtype=np.int64))
    if cents.ndim != 2 or cents.shape[1] != pts.shape[1]:
        raise ValueError(f"centroids shape {cents.shape} does not match dimension {pts.shape[1]}")
    if labels.shape != (pts.shape[0],):
        raise ValueError(f"{labels.shape[0]} assignments for {pts.shape[0]} points")
    if labels.size and (labels.min() < 0 or labels.max() >= cents.shape[0]):
        raise ValueError(f"assignment label out of range [0, {cents.shape[0]})")
    return _fsum(_kernels.point_dist2(pts, cents, labels))


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    diff = x - x[chosen[0]]
    d2 = (diff * diff).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            cdf = np.cumsum(d2)
            idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            idx = min(idx, n - 1)
        else:
            # every remaining point coincides with a chosen centroid
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(len(free))]) if len(free) else int(rng.integers(n))
        chosen.append(idx)
        diff = x - x[idx]
        np.minimum(d2, (diff * diff).sum(axis=1), out=d2)
    return x[chosen].copy()


def _reseed_empty(x, centroids, labels, counts):
    empty = np.nonzero(counts == 0)[0]
    if len(empty) == 0:
        return False
    d2 = _kernels.point_dist2(x, centroids, labels)
    # farthest first; stable so equal distances go to the lower index
    order = np.argsort(-d2, kind="stable")
    moved = False
    for slot, idx in zip(empty, order):
        if d2[idx] <= 0.0:
            break
        centroids[slot] = x[idx]
        moved = True
    return moved


def kmeans_fit(
    points,
    k: int,
    seed: int | None = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    init: np.ndarray | None = None,
) -> KMeansModel:
    """Fit k-means by Lloyd iteration.

    Starts from k-means++ centres drawn with ``seed`` unless explicit ``init``
    centroids are given.  Stops when no centroid moves by ``tol`` or more
    (Euclidean), when assignments repeat, or after ``max_iter`` rounds.
    A cluster that goes empty is re-seeded at the point farthest from its
    current centroid.
    """
    ps = as_points(points)
    x = ps.points
    n = ps.n
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    if init is None:
        centroids = kmeans_plus_plus(x, k, np.random.default_rng(seed))
    else:
        centroids = np.array(init, dtype=np.float64, copy=True)
        if centroids.shape != (k, ps.d):
            raise ValueError(f"init must have shape {(k, ps.d)}, got {centroids.shape}")

    trace = []
    labels = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new_labels, _ = _kernels.assign(x, centroids)
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            it -= 1
            break
        labels = new_labels
        sums, counts = _kernels.cluster_sums(x, labels, k)
        updated = centroids.copy()
        live = counts > 0
        updated[live] = sums[live] / counts[live, None]
        trace.append(_fsum(_kernels.point_dist2(x, updated, labels)))
        reseeded = _reseed_empty(x, updated, labels, counts)
        shift = np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max()
        centroids = updated
        if not reseeded and shift < tol:
            converged = True
            break

    # only reached with max_iter exhausted on the first round
    if labels is None:
        labels, _ = _kernels.assign(x, centroids)
    centroids.setflags(write=False)
    labels.setflags(write=False)
    return KMeansModel(
        k=int(k),
        centroids=centroids,
        assignments=labels,
        wcss=wcss(ps, centroids, labels),
        iterations=max(it, 1),
        seed=seed,
        converged=converged,
        trace=tuple(trace),
    )


def restart_seeds(seed: int | None, restarts: int) -> list:
    """Seeds for ``restarts`` fits; the first is ``seed`` itself."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    extra = np.random.SeedSequence(seed).generate_state(restarts - 1) if restarts > 1 else []
    return [seed] + [int(s) for s in extra]


def kmeans_best_of(points, k: int, seed: int | None = 0, restarts: int = 1, **kw) -> KMeansModel:
    """Lowest-WCSS model over ``restarts`` seeded fits (earliest wins ties)."""
    best = None
    for s in restart_seeds(seed, restarts):
        model = kmeans_fit(points, k, seed=s, **kw)
        if best is None or model.wcss < best.wcss:
            best = model
    return best


@dataclass(frozen=True)
class ElbowCurve:
    entries: tuple  # ((k, wcss), ...)
    knee: int | None

    @property
    def ks(self) -> list:
        return [k for k, _ in self.entries]

    @property
    def wcss(self) -> list:
        return [w for _, w in self.entries]


def knee_index(values) -> int | None:
    """Position of the largest discrete second difference over interior points."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 3:
        return None
    second = v[:-2] - 2.0 * v[1:-1] + v[2:]
    return int(np.argmax(second)) + 1


def elbow_curve(
    points,
    k_min: int = 1,
    k_max: int = 10,
    restarts: int = 5,
    seed: int | None = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ElbowCurve:
    """WCSS against k with a knee suggestion.

    Each k keeps the best of ``restarts`` k-means++ fits plus one fit warm-started
    from the best (k-1) centroids with an extra centre on the worst-fitted
    point.  The warm start can only lower WCSS relative to k-1, which keeps the
    curve non-increasing.
    """
    ps = as_points(points)
    if not (1 <= k_min <= k_max):
        raise ValueError(f"need 1 <= k_min <= k_max, got k_min={k_min}, k_max={k_max}")
    if k_max > ps.n:
        raise ValueError(f"k_max={k_max} exceeds the number of points n={ps.n}")
    entries = []
    prev = None
    for k in range(k_min, k_max + 1):
        best = kmeans_best_of(ps, k, seed=None if seed is None else seed + k, restarts=restarts,
                              max_iter=max_iter, tol=tol)
        if prev is not None:
            resid = _kernels.point_dist2(ps.points, np.asarray(prev.centroids), np.asarray(prev.assignments))
            init = np.vstack([prev.centroids, ps.points[int(np.argmax(resid))]])
            warm = kmeans_fit(ps, k, seed=None, max_iter=max_iter, tol=tol, init=init)
            if warm.wcss < best.wcss:
                best = warm
        entries.append((k, best.wcss))
        prev = best
    idx = knee_index([w for _, w in entries])
    return ElbowCurve(entries=tuple(entries), knee=None if idx is None else entries[idx][0])
