import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusbird import adjusted_rand_index, support_recovery
from clusbird.evaluate import align_columns


def pair_count_ari(a, b):
    """ARI from explicit pair enumeration, exact in rationals."""
    same_a = same_b = both = 0
    pairs = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        pairs += 1
        sa, sb = a[i] == a[j], b[i] == b[j]
        same_a += sa
        same_b += sb
        both += sa and sb
    expected = Fraction(same_a * same_b, pairs)
    top = Fraction(same_a + same_b, 2)
    if top == expected:
        return None
    return (both - expected) / (top - expected)


def test_identical_and_relabeled():
    a = [1, 1, 2, 2, 3]
    assert adjusted_rand_index(a, a) == 1.0
    assert adjusted_rand_index(a, [7, 7, 5, 5, 9]) == 1.0


def test_four_point_example():
    a, b = (1, 1, 2, 2), (1, 2, 1, 2)
    assert adjusted_rand_index(a, b) == float(pair_count_ari(a, b))
    assert adjusted_rand_index(a, b) == -0.5


def test_degenerate_denominator():
    with pytest.warns(RuntimeWarning):
        assert adjusted_rand_index([1, 1, 1], [2, 2, 2]) == 1.0
    with pytest.warns(RuntimeWarning):
        assert adjusted_rand_index([1, 2, 3], [4, 5, 6]) == 1.0
    # one trivial partition alone leaves the index defined
    assert adjusted_rand_index([1, 2, 3], [1, 1, 1]) == 0.0


def test_input_validation():
    with pytest.raises(ValueError):
        adjusted_rand_index([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        adjusted_rand_index([1], [1])


labels = st.integers(2, 30).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n)))


@settings(max_examples=150, deadline=None)
@given(labels)
def test_symmetric_and_exact(pair):
    a, b = pair
    oracle = pair_count_ari(a, b)
    if oracle is None:
        return
    value = adjusted_rand_index(a, b)
    assert value == adjusted_rand_index(b, a)
    assert value == float(oracle)


@settings(max_examples=50, deadline=None)
@given(labels, st.permutations(range(5)))
def test_label_permutation_invariance(pair, perm):
    a, b = pair
    if pair_count_ari(a, b) is None:
        return
    assert adjusted_rand_index([perm[x] for x in a], b) == adjusted_rand_index(a, b)


def test_chance_level():
    rng = np.random.default_rng(3)
    vals = [adjusted_rand_index(rng.integers(0, 3, 300), rng.integers(0, 3, 300)) for _ in range(200)]
    assert abs(np.mean(vals)) <= 0.05


def block_truth():
    a = np.zeros((10, 2))
    a[:3, 0] = 2.0
    a[3:6, 1] = 2.0
    return a


def test_support_examples():
    true_a = block_truth()
    assert support_recovery(true_a, true_a) == (1.0, 1.0)
    assert support_recovery(true_a, np.zeros_like(true_a)) == (1.0, 0.0)
    assert support_recovery(true_a, -true_a[:, ::-1] * 0.3) == (1.0, 1.0)


def test_support_counts():
    true_a = block_truth()
    est = true_a.copy()
    est[8, 0] = 0.1  # one false positive among 14 zeros
    est[0, 0] = 0.0  # one miss among 6 nonzeros
    zero_rate, nonzero_rate = support_recovery(true_a, est)
    assert zero_rate == pytest.approx(13 / 14)
    assert nonzero_rate == pytest.approx(5 / 6)


def test_support_nan_for_empty_class():
    zr, nzr = support_recovery(np.ones((3, 1)), np.ones((3, 1)))
    assert np.isnan(zr) and nzr == 1.0


def test_alignment_greedy_for_many_columns(rng):
    true_a = np.kron(np.eye(5), np.ones((3, 1)))
    perm = rng.permutation(5)
    est = true_a[:, perm] * np.array([1, -1, 1, -1, 1])
    np.testing.assert_array_equal(align_columns(true_a, est), true_a)
    with pytest.raises(ValueError):
        align_columns(true_a, est[:, :4])
