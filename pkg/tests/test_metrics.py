import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from rfmseg.metrics import adjusted_rand_index


def test_identical_and_relabelled():
    assert adjusted_rand_index([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0


def test_known_value():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0, 1, 2])


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(-1, 3)), min_size=2, max_size=80))
def test_matches_sklearn(pairs):
    a, b = map(np.array, zip(*pairs))
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
