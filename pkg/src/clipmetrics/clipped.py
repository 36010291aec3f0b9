"""Radius-clipped fidelity and contribution-clipped coverage.

The real set defines one ball per sample with radius ``NND_k`` (distance to
its k-th nearest real neighbour, self excluded). For fidelity the radii are
capped at the median ``NND_k``; every per-sample contribution is capped at 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateCalibrationError, check_features, check_k, check_same_dim, sq_threshold
from .neighbors import NeighborIndex


@dataclass(frozen=True)
class ClippedRadii:
    """Clipped ball radii of a real set plus the members of every clipped ball.

    ``members[offsets[i]:offsets[i + 1]]`` lists the other real samples inside
    ball ``i`` (self excluded), in ascending index order.
    """

    radii: np.ndarray
    median_nnd: float
    nnd: np.ndarray
    offsets: np.ndarray
    members: np.ndarray

    def ball_members(self, i):
        return self.members[self.offsets[i] : self.offsets[i + 1]]

    def loo_counts(self):
        """For every real sample, the number of other real clipped balls holding it."""
        return np.bincount(self.members, minlength=len(self.radii))


@dataclass(frozen=True)
class ClippedScores:
    clipped_density_unnorm: float
    clipped_density_real: float
    clipped_density: float
    clipped_coverage_unnorm: float


def real_neighbors(index, k):
    """Self-excluded kNN table of the indexed set with one spare column.

    The extra column (when the set is large enough) tells whether the k-th
    distance is tied with further points, which matters for ball membership.
    """
    check_k(k, index.n)
    kk = k + 1 if k + 1 < index.n else k
    return index.knn(None, k=kk, exclude_self=True)


def _radii_from_table(index, table, k):
    nnd = table.distances[:, k - 1].copy()
    median = float(np.median(nnd))
    radii = np.minimum(nnd, median)
    thr = sq_threshold(radii)
    inside = table.sq_distances[:, :k] <= thr[:, None]
    # a spare neighbour inside the ball means ties at the k-th distance run
    # past the table; re-collect those balls with a radius query
    if table.k > k:
        spill = np.flatnonzero(table.sq_distances[:, k] <= thr)
    else:
        spill = np.zeros(0, dtype=np.int64)
    extra = {}
    if len(spill):
        found = index.radius_neighbors(index.points[spill], radii[spill])
        for i, ids in zip(spill, found):
            extra[int(i)] = ids[ids != i]
    counts = inside.sum(axis=1)
    for i, ids in extra.items():
        counts[i] = len(ids)
    offsets = np.zeros(index.n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    members = np.empty(offsets[-1], dtype=np.int64)
    for i in range(index.n):
        if i in extra:
            ids = extra[i]
        else:
            ids = np.sort(table.indices[i, :k][inside[i]])
        members[offsets[i] : offsets[i + 1]] = ids
    return ClippedRadii(radii=radii, median_nnd=median, nnd=nnd, offsets=offsets, members=members)


def clipped_radii(real, k, backend="auto", index=None):
    """``R_k(x_i) = min(NND_k(x_i), median_l NND_k(x_l))`` for every real sample.

    For an even number of samples the median is the mean of the two middle
    order statistics.
    """
    if index is None:
        real = check_features(real, "real")
        index = NeighborIndex(real, backend=backend)
    k = check_k(k, index.n, "clipped_radii")
    return _radii_from_table(index, real_neighbors(index, k), k)


def capped_mean(counts, k):
    """``mean(min(counts / k, 1))`` evaluated from integers."""
    counts = np.asarray(counts, dtype=np.int64)
    return float(np.minimum(counts, k).sum()) / (k * len(counts))


def density_real_from_radii(radii, k):
    return capped_mean(radii.loo_counts(), k)


def normalize_density(unnorm, real):
    if real <= 0.0:
        raise DegenerateCalibrationError(
            "degenerate reference calibration: no real sample lies in another real clipped ball"
        )
    return min(unnorm / real, 1.0)


def coverage_counts_knn(real_nnd, synth_index, real, k):
    """Per real sample, how many of its k nearest synthetic samples lie in its ball.

    Equals ``min(#synthetic samples in the ball, k)`` and needs only a kNN
    search over the synthetic set.
    """
    kk = min(k, synth_index.n)
    table = synth_index.knn(real, k=kk)
    return (table.sq_distances <= sq_threshold(real_nnd)[:, None]).sum(axis=1)


def coverage_counts_radius(real_nnd, synth_index, real):
    """Per real sample, the number of synthetic samples in its (unclipped) ball."""
    found = synth_index.radius_neighbors(real, real_nnd)
    return np.array([len(ids) for ids in found], dtype=np.int64)


# -------------------------------------------------------------- public operations


def _prepare(real, synth, k, metric):
    real = check_features(real, "real")
    synth = check_features(synth, "synth")
    check_same_dim(real, synth)
    k = check_k(k, real.shape[0], metric, "real samples")
    return real, synth, k


def clipped_density_unnorm(real, synth, k=5, backend="auto"):
    """Mean over synthetic samples of ``min(#clipped real balls containing it / k, 1)``."""
    real, synth, k = _prepare(real, synth, k, "clipped_density_unnorm")
    index = NeighborIndex(real, backend=backend)
    radii = clipped_radii(real, k, index=index)
    per_synth, _ = index.ball_counts(synth, radii.radii)
    return capped_mean(per_synth, k)


def clipped_density_real(real, k=5, backend="auto"):
    """Leave-one-out clipped fidelity of the real set scored against itself."""
    real = check_features(real, "real")
    k = check_k(k, real.shape[0], "clipped_density_real", "real samples")
    radii = clipped_radii(real, k, backend=backend)
    return density_real_from_radii(radii, k)


def clipped_density(real, synth, k=5, backend="auto"):
    """Clipped Density: ``min(unnorm / real_calibration, 1)``.

    Raises :class:`DegenerateCalibrationError` when the real calibration is 0.
    """
    return clipped_scores(real, synth, k, backend=backend).clipped_density


def clipped_coverage_unnorm(real, synth, k=5, backend="auto", method="knn"):
    """Mean over real samples of ``min(#synthetic samples in its NND_k ball / k, 1)``.

    ``method="knn"`` counts, among the k nearest synthetic samples of each
    real sample, those inside its ball; ``method="radius"`` runs a radius
    query. Both give identical results.
    """
    real, synth, k = _prepare(real, synth, k, "clipped_coverage_unnorm")
    real_index = NeighborIndex(real, backend=backend)
    nnd = real_index.knn(None, k=k, exclude_self=True).kth
    synth_index = NeighborIndex(synth, backend=backend)
    if method == "knn":
        counts = coverage_counts_knn(nnd, synth_index, real, k)
    elif method == "radius":
        counts = coverage_counts_radius(nnd, synth_index, real)
    else:
        raise ValueError(f"unknown method {method!r}; choose 'knn' or 'radius'")
    return capped_mean(counts, k)


def clipped_scores(real, synth, k=5, backend="auto"):
    real, synth, k = _prepare(real, synth, k, "clipped_density")
    index = NeighborIndex(real, backend=backend)
    radii = clipped_radii(real, k, index=index)
    per_synth, per_real = index.ball_counts(synth, np.column_stack([radii.nnd, radii.radii]))
    unnorm = capped_mean(per_synth[:, 1], k)
    real_score = density_real_from_radii(radii, k)
    return ClippedScores(
        clipped_density_unnorm=unnorm,
        clipped_density_real=real_score,
        clipped_density=normalize_density(unnorm, real_score),
        clipped_coverage_unnorm=capped_mean(per_real[:, 0], k),
    )
