"""The numba kernels and their numpy twins must agree exactly."""
import os
import subprocess
import sys

import numpy as np
import pytest

from rfmseg.clustering import _kernels_numba as nb
from rfmseg.clustering import _kernels_numpy as npk
from rfmseg.synthetic import dense_plus_outliers


def canon_csr(indptr, indices):
    return [sorted(indices[indptr[i]:indptr[i + 1]].tolist()) for i in range(len(indptr) - 1)]


def test_assign_and_sums(rng):
    x = rng.normal(size=(3000, 3))
    c = rng.normal(size=(7, 3))
    la, da = nb.assign(x, c)
    lb, db = npk.assign(x, c)
    assert np.array_equal(la, lb)
    np.testing.assert_allclose(da, db, rtol=1e-12, atol=1e-14)
    sa, ca = nb.cluster_sums(x, la, 7)
    sb, cb = npk.cluster_sums(x, la, 7)
    assert np.array_equal(ca, cb)
    np.testing.assert_allclose(sa, sb, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(nb.point_dist2(x, c, la), npk.point_dist2(x, c, la), rtol=1e-12, atol=1e-14)


def test_assign_ties_go_low():
    x = np.array([[0.0, 0.0]])
    c = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    assert nb.assign(x, c)[0].tolist() == npk.assign(x, c)[0].tolist() == [0]


@pytest.mark.parametrize("d", [1, 2, 3, 7])
def test_radius_neighbors(d, rng):
    x = rng.uniform(0, 4, size=(700, d))
    eps = 0.6 if d < 7 else 2.0
    a = canon_csr(*nb.radius_neighbors(x, eps))
    b = canon_csr(*npk.radius_neighbors(x, eps))
    assert a == b


def test_radius_neighbors_boundary():
    # a pair exactly eps apart counts as neighbours on both paths
    x = np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])
    assert canon_csr(*nb.radius_neighbors(x, 0.5)) == canon_csr(*npk.radius_neighbors(x, 0.5)) == [[0, 1], [0, 1], [2]]


@pytest.mark.parametrize("eps,mp", [(0.3, 4), (0.8, 5), (0.15, 3)])
def test_dbscan_expand(eps, mp):
    x, _ = dense_plus_outliers(1500, seed=4)
    indptr, indices = nb.radius_neighbors(x, eps)
    core = np.diff(indptr) >= mp
    assert np.array_equal(nb.dbscan_expand(indptr, indices, core), npk.dbscan_expand(indptr, indices, core))


@pytest.mark.parametrize("method", range(4))
def test_agglomerate(method, rng):
    x = rng.normal(size=(200, 3))
    a = nb.agglomerate(x, method)
    b = npk.agglomerate(x, method)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) and np.array_equal(a[3], b[3])
    np.testing.assert_allclose(a[2], b[2], rtol=1e-12)


@pytest.mark.parametrize("method", range(4))
def test_agglomerate_with_ties(method):
    grid = np.array([[i, j] for i in range(5) for j in range(5)], dtype=np.float64)
    a = nb.agglomerate(grid, method)
    b = npk.agglomerate(grid, method)
    for u, v in zip(a, b):
        assert np.allclose(u, v)


@pytest.mark.parametrize("flag,expect", [("1", "numpy"), ("", "numba")])
def test_env_flag(flag, expect):
    env = dict(os.environ, RFMSEG_DISABLE_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from rfmseg.clustering import _kernels; print(_kernels.BACKEND, _kernels.assign.__module__)"],
        env=env, capture_output=True, text=True, check=True,
    ).stdout.split()
    assert out[0] == expect and out[1].endswith(f"_kernels_{expect}")


def test_numpy_backend_end_to_end():
    code = (
        "import numpy as np\n"
        "from rfmseg.synthetic import four_blobs\n"
        "from rfmseg.clustering import kmeans_fit\n"
        "x, _ = four_blobs(500, seed=2)\n"
        "print(repr(kmeans_fit(x, 4, seed=3).wcss))\n"
    )
    runs = {}
    for flag in ("1", ""):
        env = dict(os.environ, RFMSEG_DISABLE_NUMBA=flag)
        runs[flag] = float(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                          text=True, check=True).stdout)
    assert runs["1"] == pytest.approx(runs[""], rel=1e-12)
