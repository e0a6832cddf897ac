"""Vectorised numpy/scipy twins of the numba kernels.

Used when numba is unavailable or disabled.  Radius search goes through a
scipy k-d tree; agglomeration keeps a dense n x n matrix, so
memory is the binding limit there.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

_CHUNK = 2048


def assign(points, centroids):
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _CHUNK):
        diff = points[lo:lo + _CHUNK, None, :] - centroids[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        # argmin returns the first minimum -> lowest-indexed centroid on ties
        lab = d2.argmin(axis=1)
        labels[lo:lo + _CHUNK] = lab
        dist2[lo:lo + _CHUNK] = d2[np.arange(len(lab)), lab]
    return labels, dist2


def cluster_sums(points, labels, k):
    d = points.shape[1]
    sums = np.zeros((k, d), dtype=np.float64)
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def point_dist2(points, centroids, labels):
    diff = points - centroids[labels]
    return (diff * diff).sum(axis=1)


def radius_neighbors(points, eps):
    n = points.shape[0]
    eps2 = eps * eps
    # the tree proposes a slight superset; the exact test below matches the numba kernel bit for bit
    pairs = cKDTree(points).query_pairs(eps * (1.0 + 1e-9), output_type="ndarray")
    diff = points[pairs[:, 0]] - points[pairs[:, 1]]
    pairs = pairs[(diff * diff).sum(axis=1) <= eps2]
    self_loops = np.arange(n, dtype=np.int64)
    r = np.concatenate([pairs[:, 0], pairs[:, 1], self_loops])
    c = np.concatenate([pairs[:, 1], pairs[:, 0], self_loops])
    order = np.lexsort((c, r))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    return indptr, c[order].astype(np.int64)


def dbscan_expand(indptr, indices, is_core):
    """Same labelling as sequential expansion in ascending seed order.

    Clusters are the connected components of the core-core graph, numbered by
    their smallest core index; a border point joins the lowest-numbered
    cluster among its core neighbours (the first expansion to reach it).
    """
    n = is_core.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    core_idx = np.nonzero(is_core)[0]
    if len(core_idx) == 0:
        return labels
    rows = np.repeat(np.arange(n), np.diff(indptr))
    keep = is_core[rows] & is_core[indices]
    graph = csr_matrix((np.ones(keep.sum()), (rows[keep], indices[keep])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    comp_core = comp[core_idx]
    # first occurrence in ascending core order gives the cluster number
    uniq, first = np.unique(comp_core, return_index=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    comp_label = np.full(comp.max() + 1, -1, dtype=np.int64)
    comp_label[uniq] = rank
    labels[core_idx] = comp_label[comp_core]

    border_edge = ~is_core[rows] & is_core[indices]
    if border_edge.any():
        b_rows = rows[border_edge]
        b_lab = labels[indices[border_edge]]
        best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best, b_rows, b_lab)
        hit = best != np.iinfo(np.int64).max
        labels[hit] = best[hit]
    return labels


def _row_nearest(i, dist, node):
    """Nearest partner of slot ``i`` keyed by (distance, smaller node id, larger node id)."""
    row = dist[i]
    m = row.min()
    if not np.isfinite(m):
        return -1, np.inf
    cand = np.flatnonzero(row == m)
    if len(cand) > 1:
        lo = np.minimum(node[cand], node[i])
        hi = np.maximum(node[cand], node[i])
        cand = cand[np.lexsort((hi, lo))]
    return int(cand[0]), float(m)


def agglomerate(points, method):
    """Same merge rule as the numba kernel, on a square matrix with a per-row nearest-partner cache."""
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    del diff
    np.fill_diagonal(dist, np.inf)
    node = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    out_l = np.empty(n - 1, dtype=np.int64)
    out_r = np.empty(n - 1, dtype=np.int64)
    out_h = np.empty(n - 1, dtype=np.float64)
    out_s = np.empty(n - 1, dtype=np.int64)
    # with leaf ids equal to slots, the first minimum in a row is the lowest key
    nn = dist.argmin(axis=1)
    nn_d = dist[np.arange(n), nn]
    for step in range(n - 1):
        live = np.flatnonzero(active)
        d_live = nn_d[live]
        tied = live[d_live == d_live.min()]
        lo = np.minimum(node[tied], node[nn[tied]])
        hi = np.maximum(node[tied], node[nn[tied]])
        pick = np.lexsort((hi, lo))[0]
        a, b = sorted((int(tied[pick]), int(nn[tied[pick]])))
        na, nb = size[a], size[b]
        dab = dist[a, b]
        out_l[step], out_r[step] = lo[pick], hi[pick]
        out_h[step] = dab
        out_s[step] = na + nb

        # merged cluster lives in slot a
        active[b] = False
        others = live[(live != a) & (live != b)]
        dka = dist[others, a]
        dkb = dist[others, b]
        if method == 0:
            nd = np.minimum(dka, dkb)
        elif method == 1:
            nd = np.maximum(dka, dkb)
        elif method == 2:
            nd = (na * dka + nb * dkb) / (na + nb)
        else:
            nk = size[others]
            v = ((na + nk) * dka * dka + (nb + nk) * dkb * dkb - nk * dab * dab) / (na + nb + nk)
            nd = np.sqrt(np.maximum(v, 0.0))
        dist[others, a] = nd
        dist[a, others] = nd
        dist[b, :] = np.inf
        dist[:, b] = np.inf
        size[a] = na + nb
        node[a] = n + step

        stale = others[(nn[others] == a) | (nn[others] == b)]
        fresh = others[(nn[others] != a) & (nn[others] != b)]
        if len(fresh):
            # a changed distance to a only matters if it now beats the cached key
            nd_f = dist[fresh, a]
            cur_lo = np.minimum(node[fresh], node[nn[fresh]])
            cur_hi = np.maximum(node[fresh], node[nn[fresh]])
            new_lo = np.minimum(node[fresh], node[a])
            new_hi = np.maximum(node[fresh], node[a])
            better = (nd_f < nn_d[fresh]) | (
                (nd_f == nn_d[fresh]) & ((new_lo < cur_lo) | ((new_lo == cur_lo) & (new_hi < cur_hi)))
            )
            nn[fresh[better]] = a
            nn_d[fresh[better]] = nd_f[better]
        for k in [a, *stale.tolist()]:
            nn[k], nn_d[k] = _row_nearest(k, dist, node)
    return out_l, out_r, out_h, out_s
