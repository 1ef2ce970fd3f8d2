import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from grridge import CoDataVector, Partition
from grridge.codata import (
    bh_adjust,
    filter_features,
    geometric_ratio,
    isotonic_fit,
    nonuniform_sizes,
    partition_by_labels,
    partition_by_quantiles,
    partition_by_rank,
    partition_by_rank_nonuniform,
    welch_pvalues,
)
from grridge.data import DataError


def groups_of(part):
    return [set(part.members(g).tolist()) for g in range(part.n_groups)]


def test_partition_validation():
    with pytest.raises(DataError):
        Partition("p", [0, 2])
    with pytest.raises(DataError):
        Partition("p", [])
    with pytest.raises(DataError):
        Partition("p", [0, 1], group_labels=("a",))


def test_partition_subset_drops_empty_groups():
    sub = Partition("p", [0, 1, 2, 1], ("a", "b", "c")).subset([1, 3, 2])
    assert sub.group_of.tolist() == [0, 0, 1] and sub.group_labels == ("b", "c")


def test_from_groups_checks_cover():
    with pytest.raises(DataError):
        Partition.from_groups("p", [[0], [1]], 3)
    with pytest.raises(DataError):
        Partition.from_groups("p", [[0, 1], [1, 2]], 3)
    assert Partition.from_groups("p", [[2], [0, 1]], 3).group_of.tolist() == [1, 1, 0]


def test_quantiles_small():
    part = partition_by_quantiles([3.0, 1.0, 4.0, 2.0], 2)
    assert groups_of(part) == [{1, 3}, {0, 2}]
    assert partition_by_quantiles([3.0, 1.0], 1).n_groups == 1


def test_quantiles_equal_blocks():
    values = np.random.default_rng(0).random(40000)
    assert partition_by_quantiles(values, 8).sizes.tolist() == [5000] * 8


def test_rank_pvalues():
    vec = CoDataVector(("a", "b", "c", "d"), [0.01, 0.5, 0.03, 0.9], "pvalue")
    part = partition_by_rank(vec, 2)
    assert groups_of(part) == [{0, 2}, {1, 3}]
    assert part.monotone == "decreasing"
    assert partition_by_rank(vec, 4).n_groups == 1


def test_rank_ceiling():
    part = partition_by_rank(np.arange(9491.0), 10)
    assert part.n_groups == 950 and part.sizes[-1] == 1


def test_nonuniform_uniform_boundary():
    assert nonuniform_sizes(100, 10, 10) == [10] * 10
    assert nonuniform_sizes(100, 10, 50) == [10] * 10


def test_nonuniform_geometric():
    r = geometric_ratio(1000, 10, 5)
    assert 10 * (r ** 5 - 1) / (r - 1) == pytest.approx(1000, rel=1e-12)
    sizes = nonuniform_sizes(1000, 10, 5)
    assert sum(sizes) == 1000 and sizes[0] == 10
    assert all(a < b for a, b in zip(sizes, sizes[1:]))
    # rounded geometric bounds from the root of sum s_min r^i = p
    bounds = np.rint(10 * (r ** np.arange(6) - 1) / (r - 1)).astype(int)
    assert sizes == np.diff(bounds).tolist()


def test_nonuniform_partition_and_infeasible():
    part = partition_by_rank_nonuniform(np.arange(1000.0), 10, 5)
    assert part.sizes.tolist() == nonuniform_sizes(1000, 10, 5)
    with pytest.raises(DataError):
        nonuniform_sizes(5, 10, 3)


def test_labels():
    assert groups_of(partition_by_labels(["A", "B", "A"])) == [{0, 2}, {1}]
    assert partition_by_labels(["x"] * 5).n_groups == 1
    labels = np.random.default_rng(1).choice(list("abcdef"), 40000)
    part = partition_by_labels(labels)
    assert part.n_groups == 6 and part.sizes.sum() == 40000


def test_isotonic_examples():
    np.testing.assert_array_equal(isotonic_fit([1.0, 2.0, 5.0], [1, 1, 1]), [1.0, 2.0, 5.0])
    np.testing.assert_array_equal(isotonic_fit([2.0, 1.0], [1, 1]), [1.5, 1.5])
    np.testing.assert_array_equal(isotonic_fit([2.0, 1.0], [1, 3]), [1.25, 1.25])


vals = arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e4, 1e4, allow_nan=False))


@settings(max_examples=150, deadline=None)
@given(vals, st.sampled_from(["increasing", "decreasing"]), st.data())
def test_isotonic_properties(y, direction, data):
    w = data.draw(arrays(np.float64, y.shape, elements=st.floats(0.01, 100.0)))
    f = isotonic_fit(y, w, direction)
    d = np.diff(f)
    assert np.all(d >= -1e-9) if direction == "increasing" else np.all(d <= 1e-9)
    scale = max(1.0, np.abs(y).max())
    assert abs(np.sum(w * f) / np.sum(w) - np.sum(w * y) / np.sum(w)) <= 1e-12 * scale
    np.testing.assert_allclose(isotonic_fit(f, w, direction), f, rtol=1e-12, atol=1e-12 * scale)


def test_isotonic_rejects_bad_input():
    with pytest.raises(ValueError):
        isotonic_fit([1.0, 2.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        isotonic_fit([1.0], [1.0], "sideways")


def test_bh_example():
    np.testing.assert_allclose(bh_adjust([0.01, 0.02, 0.03]), [0.03, 0.03, 0.03])


@pytest.mark.filterwarnings("ignore:Precision loss")
def test_welch_identical_means():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [1.0, 5.0], [2.0, 5.0]])
    y = np.array([0, 0, 1, 1])
    p, flagged = welch_pvalues(X, y)
    assert p[0] == pytest.approx(1.0) and p[1] == 1.0 and flagged.tolist() == [False, True]
    assert 0 not in filter_features(X, y).tolist()


def test_filter_vacuous_thresholds_keep_all():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 15))
    y = np.r_[np.zeros(10), np.ones(10)]
    assert filter_features(X, y, fdr_max=1.0, min_meandiff=0.0).tolist() == list(range(15))
