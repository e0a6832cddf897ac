from __future__ import annotations

import numpy as np


def _comb2(x: np.ndarray) -> float:
    x = x.astype(np.float64)
    return float((x * (x - 1.0) / 2.0).sum())


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two flat partitions of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be 1-D and the same length")
    n = a.size
    if n < 2:
        return 1.0
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    index = _comb2(table)
    rows = _comb2(table.sum(axis=1))
    cols = _comb2(table.sum(axis=0))
    expected = rows * cols / _comb2(np.array([n]))
    max_index = (rows + cols) / 2.0
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)
