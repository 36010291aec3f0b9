"""kNN-ball baselines: improved Precision/Recall, Density, Coverage and the
symmetric variants built from them.
"""
from __future__ import annotations

import numpy as np

from .core import check_features, check_k, check_same_dim
from .neighbors import NeighborIndex


def _inputs(real, synth):
    real = check_features(real, "real")
    synth = check_features(synth, "synth")
    check_same_dim(real, synth)
    return real, synth


def real_ball_counts(real, synth, k, backend="auto", index=None):
    """Ball counts against real balls of radius ``NND_k``.

    Returns ``(per_synth, per_real)``: for each synthetic sample the number of
    real balls containing it, and for each real ball the number of synthetic
    samples inside.
    """
    if index is None:
        index = NeighborIndex(real, backend=backend)
    nnd = index.knn(None, k=k, exclude_self=True).kth
    return index.ball_counts(synth, nnd)


def synth_ball_counts(real, synth, k, backend="auto", index=None):
    """Ball counts against synthetic balls of radius ``NND_k`` (synthetic-to-synthetic).

    Returns ``(per_real, per_synth)``: for each real sample the number of
    synthetic balls containing it, and for each synthetic ball the number of
    real samples inside.
    """
    if index is None:
        index = NeighborIndex(synth, backend=backend)
    nnd = index.knn(None, k=k, exclude_self=True).kth
    return index.ball_counts(real, nnd)


def improved_precision(real, synth, k=5, backend="auto"):
    """Fraction of synthetic samples inside at least one real k-NN ball."""
    real, synth = _inputs(real, synth)
    k = check_k(k, len(real), "iprecision", "real samples")
    per_synth, _ = real_ball_counts(real, synth, k, backend)
    return float(np.count_nonzero(per_synth)) / len(synth)


def improved_recall(real, synth, k=5, backend="auto"):
    """Fraction of real samples inside at least one synthetic k-NN ball."""
    real, synth = _inputs(real, synth)
    k = check_k(k, len(synth), "irecall", "synthetic samples")
    per_real, _ = synth_ball_counts(real, synth, k, backend)
    return float(np.count_nonzero(per_real)) / len(real)


def density(real, synth, k=5, backend="auto"):
    """Average number of real balls per synthetic sample, divided by ``k``.

    Not bounded by 1.
    """
    real, synth = _inputs(real, synth)
    k = check_k(k, len(real), "density", "real samples")
    per_synth, _ = real_ball_counts(real, synth, k, backend)
    return float(per_synth.sum()) / (k * len(synth))


def coverage(real, synth, k=5, backend="auto"):
    """Fraction of real balls holding at least one synthetic sample."""
    real, synth = _inputs(real, synth)
    k = check_k(k, len(real), "coverage", "real samples")
    _, per_real = real_ball_counts(real, synth, k, backend)
    return float(np.count_nonzero(per_real)) / len(real)


def complementary_precision(real, synth, k=5, backend="auto"):
    """Coverage with the roles swapped: fraction of synthetic balls holding a real sample."""
    real, synth = _inputs(real, synth)
    k = check_k(k, len(synth), "sym_precision", "synthetic samples")
    _, per_synth = synth_ball_counts(real, synth, k, backend)
    return float(np.count_nonzero(per_synth)) / len(synth)


def sym_precision(real, synth, k=5, backend="auto"):
    """``min(iPrecision, complementary Precision)``."""
    real, synth = _inputs(real, synth)
    check_k(k, min(len(real), len(synth)), "sym_precision", "samples in each set")
    return min(
        improved_precision(real, synth, k, backend),
        complementary_precision(real, synth, k, backend),
    )


def sym_recall(real, synth, k=5, backend="auto"):
    """``min(iRecall, Coverage)``."""
    real, synth = _inputs(real, synth)
    check_k(k, min(len(real), len(synth)), "sym_recall", "samples in each set")
    return min(improved_recall(real, synth, k, backend), coverage(real, synth, k, backend))
