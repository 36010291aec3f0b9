import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clipmetrics import KRangeError, build_index, count_within, knn_distances
from clipmetrics.neighbors import NeighborIndex, resolve_backend
from clipmetrics.reference import pairwise_distances

BACKENDS = ["tree", "brute"]


def oracle_knn(ref, queries, k, exclude_self):
    D = pairwise_distances(queries, ref)
    if exclude_self:
        np.fill_diagonal(D, np.inf)
    order = np.lexsort((np.broadcast_to(np.arange(len(ref)), D.shape), D), axis=1)[:, :k]
    return np.take_along_axis(D, order, 1), order


def test_line_example():
    idx = build_index(np.array([[0.0], [1.0], [3.0]]))
    t = knn_distances(idx, None, k=1, exclude_self=True)
    assert t.kth.tolist() == [1.0, 1.0, 2.0]
    assert t.indices[:, 0].tolist() == [1, 0, 1]


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_point(backend):
    idx = build_index(np.zeros((1, 3)), backend)
    with pytest.raises(KRangeError):
        idx.knn(None, k=1, exclude_self=True)
    assert idx.knn(np.ones((1, 3)), k=1).distances[0, 0] == pytest.approx(np.sqrt(3))


@pytest.mark.parametrize("backend", BACKENDS)
def test_k_equal_n_with_self_exclusion_errors(backend):
    idx = build_index(np.random.default_rng(0).standard_normal((4, 2)), backend)
    with pytest.raises(KRangeError):
        idx.knn(None, k=4, exclude_self=True)
    idx.knn(None, k=3, exclude_self=True)


@pytest.mark.parametrize("backend", BACKENDS)
def test_coincident_query_distance_zero(backend):
    X = np.random.default_rng(1).standard_normal((50, 3))
    t = build_index(X, backend).knn(X[7:8], k=1)
    assert t.distances[0, 0] == 0.0 and t.indices[0, 0] == 7


@pytest.mark.parametrize("backend", BACKENDS)
def test_duplicates_first_with_lowest_index(backend):
    X = np.random.default_rng(2).standard_normal((40, 2))
    X[10] = X[3]
    X[25] = X[3]
    t = build_index(X, backend, ).knn(None, k=3, exclude_self=True)
    assert t.distances[3, :2].tolist() == [0.0, 0.0]
    assert t.indices[3, :2].tolist() == [10, 25]
    assert t.indices[25, :2].tolist() == [3, 10]


def test_ties_broken_by_index():
    # 0 has neighbours at -1 (index 1) and +1 (index 2): equal distance
    X = np.array([[0.0], [-1.0], [1.0], [5.0]])
    for backend in BACKENDS:
        t = NeighborIndex(X, backend).knn(None, k=1, exclude_self=True)
        assert t.indices[0, 0] == 1


def test_gaussian_5nn_backends_agree():
    X = np.random.default_rng(3).standard_normal((1000, 8))
    a = NeighborIndex(X, "tree").knn(None, k=5, exclude_self=True)
    b = NeighborIndex(X, "brute").knn(None, k=5, exclude_self=True)
    assert np.array_equal(a.sq_distances, b.sq_distances)
    assert np.array_equal(a.indices, b.indices)
    d, i = oracle_knn(X, X, 5, True)
    assert np.array_equal(a.indices, i)
    assert np.array_equal(a.distances, d)


@pytest.mark.parametrize("leaf_size", [1, 3, 32])
def test_tree_matches_oracle_with_queries(leaf_size):
    rng = np.random.default_rng(leaf_size)
    X = np.round(rng.standard_normal((300, 3)), 1)
    Q = np.round(rng.standard_normal((80, 3)), 1)
    t = NeighborIndex(X, "tree", leaf_size).knn(Q, k=7)
    d, i = oracle_knn(X, Q, 7, False)
    assert np.array_equal(t.indices, i)
    assert np.array_equal(t.distances, d)


def test_count_within_examples():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    for backend in BACKENDS:
        idx = build_index(X, backend)
        assert count_within(idx, [1.0, 0.0], 0.0)[0] == 1
        assert count_within(idx, [10.0, 0.0], 6.9)[0] == 0
        n, ids = count_within(idx, [1.0, 0.0], 2.0)
        assert n == 3 and ids.tolist() == [0, 1, 2]


def test_count_within_random_backends_agree():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((200, 4))
    tree, brute = NeighborIndex(X, "tree", 8), NeighborIndex(X, "brute")
    for _ in range(100):
        c = rng.standard_normal(4)
        r = float(rng.uniform(0, 3))
        a, b = tree.count_within(c, r), brute.count_within(c, r)
        expected = np.flatnonzero(pairwise_distances(c[None], X)[0] <= r)
        assert a[0] == b[0] == len(expected)
        assert np.array_equal(a[1], expected) and np.array_equal(b[1], expected)


def test_ball_counts_match_oracle():
    rng = np.random.default_rng(5)
    X = np.round(rng.standard_normal((150, 2)), 1)
    Y = np.round(rng.standard_normal((120, 2)), 1)
    r = rng.uniform(0, 1, 150)
    radii = np.column_stack([r, r / 2])
    inside = pairwise_distances(X, Y)[:, :, None] <= radii[:, None, :]
    for backend in BACKENDS:
        per_q, per_r = NeighborIndex(X, backend, 4).ball_counts(Y, radii)
        assert np.array_equal(per_q, inside.sum(axis=0))
        assert np.array_equal(per_r, inside.sum(axis=1))


def test_ball_counts_column_order_enforced():
    X = np.zeros((3, 1))
    with pytest.raises(ValueError, match="dominate"):
        NeighborIndex(X).ball_counts(X, np.array([[1.0, 2.0]] * 3))


def test_index_is_read_only_and_does_not_touch_input():
    X = np.random.default_rng(6).standard_normal((20, 2))
    idx = NeighborIndex(X)
    assert X.flags.writeable
    with pytest.raises(ValueError):
        idx.points[0, 0] = 1.0


def test_exclude_self_requires_own_points():
    X = np.random.default_rng(7).standard_normal((20, 2))
    with pytest.raises(ValueError, match="indexed set"):
        NeighborIndex(X).knn(X + 1, k=2, exclude_self=True)


def test_resolve_backend():
    assert resolve_backend("auto", 100, 3) == "brute"
    assert resolve_backend("auto", 5000, 3) == "tree"
    assert resolve_backend("auto", 5000, 64) == "brute"
    assert resolve_backend("tree", 10, 3) == "tree"
    with pytest.raises(ValueError):
        resolve_backend("ball", 10, 3)


def test_repeated_queries_identical():
    X = np.random.default_rng(8).standard_normal((600, 5))
    idx = NeighborIndex(X)
    a = idx.knn(None, k=4, exclude_self=True)
    b = idx.knn(None, k=4, exclude_self=True)
    assert np.array_equal(a.sq_distances, b.sq_distances) and np.array_equal(a.indices, b.indices)


points = st.integers(2, 120).flatmap(
    lambda n: st.integers(1, 6).flatmap(
        lambda d: arrays(np.float64, (n, d), elements=st.integers(-4, 4).map(float))
    )
)


@given(points, st.integers(1, 6))
def test_backend_equivalence_property(X, k):
    k = min(k, len(X) - 1)
    a = NeighborIndex(X, "tree", 4).knn(None, k=k, exclude_self=True)
    b = NeighborIndex(X, "brute").knn(None, k=k, exclude_self=True)
    assert np.array_equal(a.sq_distances, b.sq_distances)
    assert np.array_equal(a.indices, b.indices)
    assert np.all(np.diff(a.distances, axis=1) >= 0)
    assert not np.any(a.indices == np.arange(len(X))[:, None])


@given(points, st.floats(0, 5), st.floats(0, 5))
def test_count_within_monotone_in_radius(X, r1, r2):
    lo, hi = sorted((r1, r2))
    idx = NeighborIndex(X, "tree", 4)
    c = X.mean(axis=0)
    assert idx.count_within(c, lo)[0] <= idx.count_within(c, hi)[0]
