import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage as scipy_linkage

from oracles import naive_agglomerative, same_partition
from rfmseg.clustering import (
    LINKAGES,
    TooLargeError,
    agglomerative_fit,
    dendrogram_from_json,
    dendrogram_to_json,
)
from rfmseg.synthetic import four_blobs


@pytest.mark.parametrize("linkage", LINKAGES)
@pytest.mark.parametrize("n,seed", [(2, 0), (9, 1), (33, 2), (64, 3)])
def test_merge_sequence_matches_naive(linkage, n, seed):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    _, tree = agglomerative_fit(x, 1, linkage=linkage)
    ref = naive_agglomerative(x, linkage)
    got = tree.merges
    assert [(l, r, s) for l, r, _, s in got] == [(l, r, s) for l, r, _, s in ref]
    np.testing.assert_allclose([h for *_, h, _ in got], [h for *_, h, _ in ref], rtol=1e-9, atol=1e-12)
    assert (np.diff(tree.height) >= 0).all()


@pytest.mark.parametrize("linkage", LINKAGES)
def test_heights_match_scipy(linkage, rng):
    x = rng.normal(size=(150, 3))
    _, tree = agglomerative_fit(x, 1, linkage=linkage)
    ref = scipy_linkage(x, method=linkage)
    np.testing.assert_allclose(tree.height, ref[:, 2], rtol=1e-9)


def test_two_points():
    _, tree = agglomerative_fit(np.array([[0.0, 0.0], [3.0, 4.0]]), 1)
    assert tree.merges == [(0, 1, 5.0, 2)]


def test_collinear_single():
    _, tree = agglomerative_fit(np.array([[0.0], [1.0], [10.0]]), 1, linkage="single")
    assert tree.merges == [(0, 1, 1.0, 2), (2, 3, 9.0, 3)]


def test_tie_break_lowest_pair():
    # unit square: four equal shortest edges, the (0, 1) pair goes first
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    _, tree = agglomerative_fit(sq, 1, linkage="single")
    assert tree.merges[0][:2] == (0, 1)
    assert [m[:2] for m in tree.merges] == [m[:2] for m in naive_agglomerative(sq, "single")]


def test_cut_extremes(rng):
    x = rng.normal(size=(20, 2))
    labels, tree = agglomerative_fit(x, 20)
    assert labels.tolist() == list(range(20))
    assert tree.cut(1).tolist() == [0] * 20
    with pytest.raises(ValueError):
        tree.cut(0)


def test_single_point():
    labels, tree = agglomerative_fit(np.zeros((1, 3)), 1)
    assert labels.tolist() == [0] and tree.merges == []


def test_ward_recovers_blobs():
    pts, truth = four_blobs(400, seed=3)
    labels, _ = agglomerative_fit(pts, 4)
    assert same_partition(labels, truth)


def test_json_roundtrip(rng):
    _, tree = agglomerative_fit(rng.normal(size=(30, 3)), 3, linkage="average")
    text = dendrogram_to_json(tree)
    back = dendrogram_from_json(text)
    assert dendrogram_to_json(back) == text
    assert back.merges == tree.merges


def test_json_string_leaves():
    from rfmseg.clustering import PointSet

    ps = PointSet.from_array(np.array([[0.0], [2.0], [3.0]]), ids=["a", "b", "c"])
    _, tree = agglomerative_fit(ps, 1)
    assert dendrogram_from_json(dendrogram_to_json(tree)).leaves == ("a", "b", "c")


def test_size_cap():
    x = np.zeros((11, 2))
    with pytest.raises(TooLargeError, match=r"O\(n\^3\)"):
        agglomerative_fit(x, 2, size_cap=10)
    labels, _ = agglomerative_fit(x, 2, size_cap=None)
    assert len(labels) == 11


def test_unknown_linkage():
    with pytest.raises(ValueError, match="linkage"):
        agglomerative_fit(np.zeros((3, 2)), 1, linkage="centroid")
