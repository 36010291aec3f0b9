"""Exact nearest-neighbour index with a kd-tree and a brute-force backend."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..core import check_features, check_k, sq_threshold
from . import _kernels

BACKENDS = ("tree", "brute")

# below this many reference points a linear scan beats tree traversal
BRUTE_MIN_POINTS = 512
# above this dimension a kd-tree cannot prune on typical embeddings
BRUTE_MIN_DIM = 24


def _n_chunks():
    return numba.get_num_threads()


def resolve_backend(backend, n, d):
    """Map ``"auto"`` to a concrete backend; validate explicit choices."""
    if backend == "auto":
        return "brute" if n < BRUTE_MIN_POINTS or d >= BRUTE_MIN_DIM else "tree"
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS + ('auto',)}")
    return backend


@dataclass(frozen=True)
class KnnTable:
    """Sorted distances and reference indices of the k nearest neighbours.

    ``distances[q, j]`` is the distance from query ``q`` to its ``(j+1)``-th
    nearest reference point ``indices[q, j]``; ties are ordered by index.
    """

    distances: np.ndarray
    indices: np.ndarray
    sq_distances: np.ndarray

    @property
    def k(self):
        return self.distances.shape[1]

    @property
    def kth(self):
        """Distance to the k-th neighbour (NND_k) for every query."""
        return self.distances[:, -1]


def _build_kdtree(points, leaf_size):
    """Median-split kd-tree on the dimension of largest spread.

    Returns node arrays in an order where every child id exceeds its parent's.
    """
    n, d = points.shape
    perm = np.arange(n, dtype=np.int64)
    start, stop, left, right, lo, hi = [], [], [], [], [], []

    def new_node(s, e):
        block = points[perm[s:e]]
        start.append(s)
        stop.append(e)
        left.append(-1)
        right.append(-1)
        lo.append(block.min(axis=0))
        hi.append(block.max(axis=0))
        return len(start) - 1

    todo = [new_node(0, n)]
    while todo:
        node = todo.pop()
        s, e = start[node], stop[node]
        if e - s <= leaf_size:
            continue
        spread = hi[node] - lo[node]
        dim = int(np.argmax(spread))
        if spread[dim] == 0.0:
            # all points coincide; a single oversized leaf is not allowed, so split by position
            order = np.arange(e - s)
        else:
            ids = perm[s:e]
            order = np.lexsort((ids, points[ids, dim]))
        perm[s:e] = perm[s:e][order]
        mid = s + (e - s) // 2
        a = new_node(s, mid)
        b = new_node(mid, e)
        left[node], right[node] = a, b
        todo.extend((b, a))

    return (
        perm,
        np.asarray(start, dtype=np.int64),
        np.asarray(stop, dtype=np.int64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.ascontiguousarray(np.asarray(lo)),
        np.ascontiguousarray(np.asarray(hi)),
    )


class NeighborIndex:
    """Immutable exact neighbour structure over one point set.

    Parameters
    ----------
    points : array-like of shape (n, d)
    backend : {"tree", "brute", "auto"}
    leaf_size : int
        Maximum number of points per kd-tree leaf.

    Both backends evaluate distances with the same summation order, so any
    query returns bit-identical results whichever backend answers it.
    """

    def __init__(self, points, backend="tree", leaf_size=32):
        points = check_features(points, "points")
        if int(leaf_size) < 1:
            raise ValueError(f"leaf_size must be >= 1, got {leaf_size}")
        self.points = points.view()
        self.points.flags.writeable = False
        self.n, self.d = points.shape
        self.backend = resolve_backend(backend, self.n, self.d)
        self.leaf_size = int(leaf_size)
        if self.backend == "tree":
            perm, *nodes = _build_kdtree(points, self.leaf_size)
            self._perm = perm
            self._nodes = tuple(nodes)
        else:
            perm = np.arange(self.n, dtype=np.int64)
            self._perm = perm
            self._nodes = None
        self._pos = np.empty(self.n, dtype=np.int64)
        self._pos[perm] = np.arange(self.n)
        self._pts_t = np.ascontiguousarray(points[perm].T)

    @property
    def n_nodes(self):
        return 1 if self._nodes is None else len(self._nodes[0])

    def _tree_args(self):
        return (self._pts_t, self._perm) + self._nodes + (self.leaf_size,)

    def _queries(self, queries):
        if queries is None:
            return self.points
        Q = check_features(queries, "queries")
        if Q.shape[1] != self.d:
            raise ValueError(f"dimension mismatch: index has d={self.d}, queries have d={Q.shape[1]}")
        return Q

    def knn(self, queries=None, k=1, exclude_self=False):
        """k nearest reference points of every query.

        With ``exclude_self`` the queries must be the indexed set itself
        (pass ``queries=None``) and query ``i`` never reports reference ``i``.
        """
        if exclude_self:
            if queries is not None and not (
                np.shape(queries) == self.points.shape and np.array_equal(queries, self.points)
            ):
                raise ValueError("exclude_self requires querying the indexed set itself")
            k = check_k(k, self.n, what="indexed points (self excluded)")
            Q = self.points
            self_idx = np.arange(self.n, dtype=np.int64)
        else:
            Q = self._queries(queries)
            if isinstance(k, bool) or int(k) != k or not 1 <= k <= self.n:
                raise ValueError(f"k must be in [1, {self.n}], got {k}")
            k = int(k)
            self_idx = np.full(Q.shape[0], -1, dtype=np.int64)
        if self.backend == "tree":
            sq, idx = _kernels.tree_knn(Q, self_idx, k, *self._tree_args())
        else:
            sq, idx = _kernels.brute_knn(Q, self_idx, k, self._pts_t)
        return KnnTable(np.sqrt(sq), idx, sq)

    def ball_counts(self, queries, radii):
        """Count reference balls ``B(p_i, radii[i, c])`` containing each query.

        ``radii`` has shape ``(n,)`` or ``(n, c)``; with several columns the
        first must be the largest radius of every row. Returns
        ``(per_query, per_reference)`` integer arrays of shape ``(nq, c)`` and
        ``(n, c)``: how many balls hold each query, and how many queries fall
        in each reference ball.
        """
        Q = self._queries(queries)
        radii = np.asarray(radii, dtype=np.float64)
        squeeze = radii.ndim == 1
        radii = radii.reshape(self.n, -1)
        if (radii < 0).any() or np.isnan(radii).any():
            raise ValueError("radii must be non-negative")
        if radii.shape[1] > 1 and (radii[:, 1:] > radii[:, :1]).any():
            raise ValueError("the first radius column must dominate the others")
        thr = np.ascontiguousarray(sq_threshold(radii)[self._perm])
        if self.backend == "tree":
            start, stop, left, right = self._nodes[:4]
            nmax = _kernels.node_max(np.ascontiguousarray(thr[:, 0]), start, stop, left, right)
            qc, rc = _kernels.tree_ball_count(Q, thr, nmax, _n_chunks(), *self._tree_args())
        else:
            qc, rc = _kernels.brute_ball_count(Q, thr, _n_chunks(), self._pts_t)
        if squeeze:
            return qc[:, 0], rc[:, 0]
        return qc, rc

    def radius_neighbors(self, queries, radius):
        """Indices (ascending) of reference points within ``radius`` of each query.

        ``radius`` is a scalar or one value per query. Returns a list of arrays.
        """
        Q = self._queries(queries)
        r = np.broadcast_to(np.asarray(radius, dtype=np.float64), (Q.shape[0],))
        if (r < 0).any() or np.isnan(r).any():
            raise ValueError("radius must be non-negative")
        qthr = np.ascontiguousarray(sq_threshold(r))
        empty = np.zeros(0, dtype=np.int64)
        counts = self._radius(Q, qthr, empty, empty, False)
        offsets = np.zeros(Q.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        out = np.empty(offsets[-1], dtype=np.int64)
        self._radius(Q, qthr, offsets, out, True)
        return [np.sort(out[offsets[i] : offsets[i + 1]]) for i in range(Q.shape[0])]

    def _radius(self, Q, qthr, offsets, out, fill):
        if self.backend == "tree":
            return _kernels.tree_radius(Q, qthr, offsets, out, fill, *self._tree_args())
        return _kernels.brute_radius(Q, qthr, offsets, out, fill, self._pts_t)

    def count_within(self, center, radius):
        """Number and ascending indices of reference points in the closed ball."""
        center = np.asarray(center, dtype=np.float64).reshape(1, -1)
        if radius < 0:
            raise ValueError(f"radius must be non-negative, got {radius}")
        (ids,) = self.radius_neighbors(center, radius)
        return len(ids), ids


def build_index(points, backend="tree", leaf_size=32):
    return NeighborIndex(points, backend=backend, leaf_size=leaf_size)


def knn_distances(index, queries=None, k=1, exclude_self=False):
    return index.knn(queries, k=k, exclude_self=exclude_self)


def count_within(index, center, radius):
    return index.count_within(center, radius)
