"""numba kernels.  Each function here has a twin in ``_kernels_numpy`` with the
same signature and the same results (labels exact, floats to rounding)."""
from __future__ import annotations

import numpy as np
from numba import njit

# ---------------------------------------------------------------- k-means


@njit(cache=True)
def assign(points, centroids):
    n, d = points.shape
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        best_j = 0
        for j in range(k):
            s = 0.0
            for a in range(d):
                t = points[i, a] - centroids[j, a]
                s += t * t
            # strict < keeps the lowest-indexed centroid on ties
            if s < best:
                best = s
                best_j = j
        labels[i] = best_j
        dist2[i] = best
    return labels, dist2


@njit(cache=True)
def cluster_sums(points, labels, k):
    n, d = points.shape
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for a in range(d):
            sums[j, a] += points[i, a]
    return sums, counts


@njit(cache=True)
def point_dist2(points, centroids, labels):
    n, d = points.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        j = labels[i]
        s = 0.0
        for a in range(d):
            t = points[i, a] - centroids[j, a]
            s += t * t
        out[i] = s
    return out


# ---------------------------------------------------------------- radius neighbours


@njit(cache=True)
def _cmp_cell(cells, row, target):
    for a in range(cells.shape[1]):
        if cells[row, a] < target[a]:
            return -1
        if cells[row, a] > target[a]:
            return 1
    return 0


@njit(cache=True)
def _find_cell(ucells, target):
    lo = 0
    hi = ucells.shape[0] - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        c = _cmp_cell(ucells, mid, target)
        if c == 0:
            return mid
        if c < 0:
            lo = mid + 1
        else:
            hi = mid - 1
    return -1


@njit(cache=True)
def _cell_neighbors(ucells, offsets):
    """Row c lists the occupied cells adjacent to cell c (itself included), -1 padded."""
    m, d = ucells.shape
    out = np.full((m, offsets.shape[0]), -1, dtype=np.int64)
    target = np.empty(d, dtype=np.int64)
    for c in range(m):
        k = 0
        for o in range(offsets.shape[0]):
            for a in range(d):
                target[a] = ucells[c, a] + offsets[o, a]
            hit = _find_cell(ucells, target)
            if hit >= 0:
                out[c, k] = hit
                k += 1
    return out


@njit(cache=True)
def _grid_pass(sorted_pts, order, starts, nbr, eps2, indptr, indices, fill):
    """Count (fill=False) or write (fill=True) neighbours, one cell block at a time."""
    d = sorted_pts.shape[1]
    for c in range(starts.shape[0] - 1):
        for s in range(starts[c], starts[c + 1]):
            i = order[s]
            pos = indptr[i]
            cnt = 0
            for k in range(nbr.shape[1]):
                c2 = nbr[c, k]
                if c2 < 0:
                    break
                for t in range(starts[c2], starts[c2 + 1]):
                    acc = 0.0
                    for a in range(d):
                        diff = sorted_pts[s, a] - sorted_pts[t, a]
                        acc += diff * diff
                    if acc <= eps2:
                        if fill:
                            indices[pos] = order[t]
                            pos += 1
                        cnt += 1
            if not fill:
                indptr[i + 1] = cnt


def grid_index(points, eps):
    """Bucket points into cubic cells of side ``eps``.

    Returns the point order sorted by cell, the unique cells, and the start
    offset of each cell in that order.
    """
    lo = points.min(axis=0)
    span = (points.max(axis=0) - lo) / eps
    if span.max(initial=0.0) > 2.0**52:
        raise ValueError("eps too small relative to the data range for a grid index")
    cells = np.floor((points - lo) / eps).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    sorted_cells = cells[order]
    change = np.any(np.diff(sorted_cells, axis=0) != 0, axis=1)
    first = np.concatenate(([0], np.nonzero(change)[0] + 1))
    ucells = np.ascontiguousarray(sorted_cells[first])
    starts = np.append(first, len(order)).astype(np.int64)
    return order.astype(np.int64), ucells, starts


def _offsets(d):
    grids = np.meshgrid(*([np.array([-1, 0, 1])] * d), indexing="ij")
    return np.ascontiguousarray(np.stack([g.ravel() for g in grids], axis=1).astype(np.int64))


@njit(cache=True)
def _brute_pass(points, eps2, indptr, indices, fill):
    n, d = points.shape
    for i in range(n):
        pos = indptr[i]
        cnt = 0
        for j in range(n):
            acc = 0.0
            for a in range(d):
                t = points[i, a] - points[j, a]
                acc += t * t
            if acc <= eps2:
                if fill:
                    indices[pos] = j
                    pos += 1
                cnt += 1
        if not fill:
            indptr[i + 1] = cnt


# grid search visits 3**d cells per point; past this brute force is cheaper
MAX_GRID_DIM = 6


def radius_neighbors(points, eps):
    """CSR adjacency of every pair within ``eps`` (self included)."""
    n, d = points.shape
    indptr = np.zeros(n + 1, dtype=np.int64)
    eps2 = eps * eps
    if d > MAX_GRID_DIM:
        _brute_pass(points, eps2, indptr, np.empty(0, dtype=np.int64), False)
        np.cumsum(indptr, out=indptr)
        indices = np.empty(indptr[-1], dtype=np.int64)
        _brute_pass(points, eps2, indptr, indices, True)
        return indptr, indices
    order, ucells, starts = grid_index(points, eps)
    nbr = _cell_neighbors(ucells, _offsets(d))
    sorted_pts = np.ascontiguousarray(points[order])
    dummy = np.empty(0, dtype=np.int64)
    _grid_pass(sorted_pts, order, starts, nbr, eps2, indptr, dummy, False)
    np.cumsum(indptr, out=indptr)
    indices = np.empty(indptr[-1], dtype=np.int64)
    _grid_pass(sorted_pts, order, starts, nbr, eps2, indptr, indices, True)
    return indptr, indices


# ---------------------------------------------------------------- DBSCAN expansion


@njit(cache=True)
def dbscan_expand(indptr, indices, is_core):
    n = is_core.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    cluster = 0
    for seed in range(n):
        if not is_core[seed] or labels[seed] != -1:
            continue
        labels[seed] = cluster
        top = 0
        stack[top] = seed
        top += 1
        while top > 0:
            top -= 1
            p = stack[top]
            for q in range(indptr[p], indptr[p + 1]):
                j = indices[q]
                if labels[j] == -1:
                    labels[j] = cluster
                    # border points are claimed but never expanded
                    if is_core[j]:
                        stack[top] = j
                        top += 1
        cluster += 1
    return labels


# ---------------------------------------------------------------- agglomerative


@njit(cache=True)
def _cidx(n, i, j):
    if i > j:
        i, j = j, i
    return n * i - (i * (i + 1)) // 2 + (j - i - 1)


@njit(cache=True)
def _key_less(d1, a1, b1, d2, a2, b2):
    if d1 < d2:
        return True
    if d1 > d2:
        return False
    if a1 < a2:
        return True
    if a1 > a2:
        return False
    return b1 < b2


@njit(cache=True)
def _rescan(n, i, dist, active, node, nn, nn_d):
    best = np.inf
    best_j = -1
    bl = 0
    bh = 0
    for j in range(n):
        if j == i or not active[j]:
            continue
        dij = dist[_cidx(n, i, j)]
        lo = min(node[i], node[j])
        hi = max(node[i], node[j])
        if best_j < 0 or _key_less(dij, lo, hi, best, bl, bh):
            best = dij
            best_j = j
            bl = lo
            bh = hi
    nn[i] = best_j
    nn_d[i] = best


@njit(cache=True)
def _condensed(points):
    n, d = points.shape
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)
    p = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for a in range(d):
                t = points[i, a] - points[j, a]
                s += t * t
            out[p] = np.sqrt(s)
            p += 1
    return out


def agglomerate(points, method):
    """Merge sequence ``(left, right, height, size)`` arrays for ``points``."""
    n = points.shape[0]
    return _linkage(_condensed(points), n, method)


@njit(cache=True)
def _linkage(dist, n, method):
    """Generic agglomeration over a condensed distance vector (mutated in place).

    method: 0 single, 1 complete, 2 average, 3 ward.
    Every slot caches its nearest active partner keyed by
    (distance, smaller node id, larger node id); the global minimum of the
    caches is the next merge.
    """
    active = np.ones(n, dtype=np.bool_)
    node = np.arange(n).astype(np.int64)
    size = np.ones(n, dtype=np.int64)
    nn = np.empty(n, dtype=np.int64)
    nn_d = np.empty(n, dtype=np.float64)
    out_l = np.empty(n - 1, dtype=np.int64)
    out_r = np.empty(n - 1, dtype=np.int64)
    out_h = np.empty(n - 1, dtype=np.float64)
    out_s = np.empty(n - 1, dtype=np.int64)
    for i in range(n):
        _rescan(n, i, dist, active, node, nn, nn_d)

    for step in range(n - 1):
        bi = -1
        bd = np.inf
        bl = 0
        bh = 0
        for i in range(n):
            if not active[i]:
                continue
            j = nn[i]
            lo = min(node[i], node[j])
            hi = max(node[i], node[j])
            if bi < 0 or _key_less(nn_d[i], lo, hi, bd, bl, bh):
                bi = i
                bd = nn_d[i]
                bl = lo
                bh = hi
        a = bi
        b = nn[bi]
        if a > b:
            a, b = b, a
        na = size[a]
        nb = size[b]
        dab = dist[_cidx(n, a, b)]
        out_l[step] = bl
        out_r[step] = bh
        out_h[step] = dab
        out_s[step] = na + nb

        # merged cluster lives in slot a
        active[b] = False
        for k in range(n):
            if not active[k] or k == a:
                continue
            dka = dist[_cidx(n, k, a)]
            dkb = dist[_cidx(n, k, b)]
            if method == 0:
                nd = min(dka, dkb)
            elif method == 1:
                nd = max(dka, dkb)
            elif method == 2:
                nd = (na * dka + nb * dkb) / (na + nb)
            else:
                nk = size[k]
                v = ((na + nk) * dka * dka + (nb + nk) * dkb * dkb - nk * dab * dab) / (na + nb + nk)
                nd = np.sqrt(max(v, 0.0))
            dist[_cidx(n, k, a)] = nd
        size[a] = na + nb
        node[a] = n + step

        if step == n - 2:
            break
        _rescan(n, a, dist, active, node, nn, nn_d)
        for k in range(n):
            if not active[k] or k == a:
                continue
            if nn[k] == a or nn[k] == b:
                _rescan(n, k, dist, active, node, nn, nn_d)
            else:
                dka = dist[_cidx(n, k, a)]
                lo = min(node[k], node[a])
                hi = max(node[k], node[a])
                cj = nn[k]
                clo = min(node[k], node[cj])
                chi = max(node[k], node[cj])
                if _key_less(dka, lo, hi, nn_d[k], clo, chi):
                    nn[k] = a
                    nn_d[k] = dka
    return out_l, out_r, out_h, out_s
