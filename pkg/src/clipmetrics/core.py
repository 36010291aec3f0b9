"""Feature-matrix validation, the distance function and shared error types.

Feature matrices are plain ``numpy`` arrays of shape ``(n_samples, n_features)``.
Every entry point funnels its inputs through :func:`check_features`, which
returns a C-contiguous float64 copy (or view) so the numeric kernels never see
anything else.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class KRangeError(ValueError):
    """Raised when ``k`` is incompatible with the sample counts of a metric."""

    def __init__(self, message, metric=None):
        super().__init__(message if metric is None else f"{metric}: {message}")
        self.metric = metric


class DegenerateCalibrationError(ArithmeticError):
    """The real leave-one-out calibration value is zero; Clipped Density is undefined."""


class FormatError(ValueError):
    """Input file does not follow the accepted NPY / CSV layout."""


def check_features(X, name="X", copy=False):
    """Validate a feature matrix and return it as C-contiguous float64.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    name : str
        Used in error messages.
    copy : bool
        Force a copy even when ``X`` already has the right layout.

    Raises
    ------
    ValueError
        If ``X`` is not two-dimensional, empty, non-numeric, or holds a
        non-finite entry (the first offending row/column is reported).
    """
    arr = np.asarray(X)
    if arr.dtype.kind not in "fiub":
        raise ValueError(f"{name}: unsupported element type {arr.dtype}")
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2D array, got {arr.ndim}D")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise ValueError(f"{name}: needs at least one sample and one feature, got shape {arr.shape}")
    arr = np.array(arr, dtype=np.float64, order="C", copy=True) if copy else np.ascontiguousarray(arr, dtype=np.float64)
    finite = np.isfinite(arr)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise ValueError(f"{name}: non-finite entry {arr[row, col]!r} at row {row}, col {col}")
    return arr


def check_same_dim(real, synth):
    if real.shape[1] != synth.shape[1]:
        raise ValueError(
            f"dimension mismatch: real has {real.shape[1]} features, synth has {synth.shape[1]}"
        )


def check_k(k, n, metric=None, what="reference samples"):
    """``1 <= k < n``: a sample's k-th neighbour must exist once self is excluded."""
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise KRangeError(f"k must be an integer, got {k!r}", metric)
    if k < 1:
        raise KRangeError(f"k must be >= 1, got {k}", metric)
    if k >= n:
        raise KRangeError(f"k={k} requires more than {k} {what}, got {n}", metric)
    return int(k)


def squared_distance(a, b):
    """Sum of squared coordinate differences, accumulated in coordinate order.

    Every code path in the package (tree leaves, brute-force tiles, test
    oracles) accumulates in this same order, so squared distances are
    bit-identical across them.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    acc = 0.0
    for t in range(a.shape[0]):
        z = a[t] - b[t]
        acc += z * z
    return acc


def distance(a, b):
    """Euclidean distance between two vectors of equal dimension."""
    return float(np.sqrt(squared_distance(a, b)))


def sq_threshold(radius):
    """Largest squared distance ``s`` with ``sqrt(s) <= radius``.

    Kernels work on squared distances; comparing ``s <= sq_threshold(r)`` is
    exactly equivalent to ``sqrt(s) <= r`` in floating point, so ball
    membership does not depend on which side of the square root a comparison
    happens.
    """
    r = np.asarray(radius, dtype=np.float64)
    s = np.atleast_1d(r * r).copy()
    rr = np.atleast_1d(r)
    while True:
        over = np.sqrt(s) > rr
        if not over.any():
            break
        s[over] = np.nextafter(s[over], -np.inf)
    while True:
        nxt = np.nextafter(s, np.inf)
        up = (np.sqrt(nxt) <= rr) & np.isfinite(nxt)
        if not up.any():
            break
        s[up] = nxt[up]
    return s.reshape(r.shape) if r.ndim else float(s[0])


@dataclass(frozen=True)
class MetricConfig:
    """Neighbour count, scenario seed and worker count shared by a run."""

    k: int = 5
    seed: int = 0
    thread_count: int = 1

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if int(self.thread_count) < 1:
            raise ValueError(f"thread_count must be >= 1, got {self.thread_count!r}")

    def check(self, n_real):
        check_k(self.k, n_real)
        return self
