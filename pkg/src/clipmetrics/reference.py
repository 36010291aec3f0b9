"""Dense O(NM) reference implementation of every metric.

Materialises full distance matrices, so only for small sets. Used as the
oracle that the indexed implementation is checked against.
"""
import numpy as np

from .calibration import apply_g, build_calibration_table


def pairwise_distances(A, B):
    """Euclidean distances, squared terms summed coordinate by coordinate."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = np.zeros((len(A), len(B)))
    for t in range(A.shape[1]):
        sq += (A[:, None, t] - B[None, :, t]) ** 2
    return np.sqrt(sq)


def kth_neighbor_distance(A, k):
    """``NND_k`` of every row of ``A`` within ``A``, self excluded."""
    D = pairwise_distances(A, A)
    np.fill_diagonal(D, np.inf)
    return np.sort(D, axis=1)[:, k - 1]


def reference_metrics(real, synth, k=5, g_mode="interp"):
    real = np.asarray(real, dtype=np.float64)
    synth = np.asarray(synth, dtype=np.float64)
    N, M = len(real), len(synth)
    out = {}

    r_real = kth_neighbor_distance(real, k)
    D_rs = pairwise_distances(real, synth)  # (N, M)
    in_real = D_rs <= r_real[:, None]
    out["iprecision"] = in_real.any(axis=0).mean()
    out["density"] = in_real.sum() / (k * M)
    out["coverage"] = in_real.any(axis=1).mean()

    if k < M:
        r_synth = kth_neighbor_distance(synth, k)
        in_synth = D_rs <= r_synth[None, :]
        out["irecall"] = in_synth.any(axis=1).mean()
        complementary = in_synth.any(axis=0).mean()
        out["sym_precision"] = min(out["iprecision"], complementary)
        out["sym_recall"] = min(out["irecall"], out["coverage"])

    clipped = np.minimum(r_real, np.median(r_real))
    per_synth = (D_rs <= clipped[:, None]).sum(axis=0)
    out["clipped_density_unnorm"] = np.minimum(per_synth / k, 1.0).mean()
    D_rr = pairwise_distances(real, real)
    np.fill_diagonal(D_rr, np.inf)
    loo = (D_rr <= clipped[None, :]).sum(axis=1)
    out["clipped_density_real"] = np.minimum(loo / k, 1.0).mean()
    if out["clipped_density_real"] > 0:
        out["clipped_density"] = min(out["clipped_density_unnorm"] / out["clipped_density_real"], 1.0)

    per_real = in_real.sum(axis=1)
    out["clipped_coverage_unnorm"] = np.minimum(per_real / k, 1.0).mean()
    table = build_calibration_table(N, M, k)
    out["clipped_coverage"] = apply_g(table, out["clipped_coverage_unnorm"], g_mode)
    return {name: float(v) for name, v in out.items()}
