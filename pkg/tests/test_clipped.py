import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clipmetrics import (
    DegenerateCalibrationError,
    clipped_coverage_unnorm,
    clipped_density,
    clipped_density_real,
    clipped_density_unnorm,
    clipped_radii,
    clipped_scores,
    density,
)
from clipmetrics.clipped import normalize_density
from clipmetrics.neighbors import NeighborIndex
from clipmetrics.reference import reference_metrics

TWO_CLUSTER_REAL = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
TWO_CLUSTER_SYNTH = np.array([[1.0], [11.0], [100.0]])


def line(*v):
    return np.array(v, dtype=np.float64)[:, None]


def test_two_cluster_adjusted_score():
    assert clipped_density_unnorm(TWO_CLUSTER_REAL, TWO_CLUSTER_SYNTH, k=2) == 2 / 3


def test_outlier_radius_clipped():
    r = clipped_radii(line(0, 1, 2, 3, 100), 1)
    assert r.nnd.tolist() == [1, 1, 1, 1, 97]
    assert r.median_nnd == 1.0
    assert r.radii.tolist() == [1, 1, 1, 1, 1]


def test_even_median_is_midpoint():
    r = clipped_radii(line(0, 1, 3, 6), 1)
    # NND_1 = [1, 1, 2, 3]
    assert r.median_nnd == 1.5
    assert r.radii.tolist() == [1, 1, 1.5, 1.5]


def test_two_points():
    r = clipped_radii(np.array([[0.0, 0.0], [3.0, 4.0]]), 1)
    assert r.radii.tolist() == [5.0, 5.0]


def test_regular_simplex():
    X = np.eye(6)
    r = clipped_radii(X, 2)
    assert np.all(r.radii == r.nnd)
    assert clipped_density_real(X, 5) == 1.0


def test_clipped_radii_invariants():
    X = np.random.default_rng(0).standard_normal((301, 3))
    r = clipped_radii(X, 5)
    assert np.all(r.radii <= r.median_nnd)
    assert np.count_nonzero(r.radii == r.nnd) >= (len(X) + 1) // 2


def test_loo_example():
    # R = [10,10,10,10]; 1000 lies in no other ball
    assert clipped_density_real(line(0, 10, 20, 1000), 1) == 0.75


def test_ball_members_match_dense():
    X = np.round(np.random.default_rng(1).standard_normal((120, 2)), 1)
    r = clipped_radii(X, 3)
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    for i in range(len(X)):
        expected = [j for j in range(len(X)) if j != i and D[i, j] <= r.radii[i]]
        assert r.ball_members(i).tolist() == expected


def test_ties_beyond_kth_column_collected():
    # all four neighbours of the centre tie at distance 1
    X = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    r = clipped_radii(X, 1)
    assert r.ball_members(0).tolist() == [1, 2, 3, 4]


def test_far_synthetic_zero():
    X = np.random.default_rng(2).standard_normal((40, 2))
    Y = X + 1e4
    assert clipped_density_unnorm(X, Y) == 0.0
    assert clipped_coverage_unnorm(X, Y) == 0.0
    assert clipped_density(X, Y) == 0.0


def test_identical_synthetic_full_coverage():
    X = np.random.default_rng(3).standard_normal((50, 3))
    assert clipped_coverage_unnorm(X, X, 1) == 1.0


def test_density_ratio_one_when_synth_is_real():
    X = np.random.default_rng(4).standard_normal((80, 2))
    s = clipped_scores(X, X, 3)
    assert 0 < s.clipped_density_real <= 1
    assert s.clipped_density == min(s.clipped_density_unnorm / s.clipped_density_real, 1.0)


def test_degenerate_calibration_raises():
    with pytest.raises(DegenerateCalibrationError, match="degenerate"):
        normalize_density(0.3, 0.0)
    assert normalize_density(0.3, 0.2) == 1.0
    assert normalize_density(0.0, 0.2) == 0.0


def test_real_calibration_positive_even_when_spread_out():
    # the closest pair always sits inside each other's clipped balls
    assert clipped_density_real(line(0, 10, 30, 70, 1000), 1) > 0


def test_large_shuffled_real_scores_high():
    X = np.random.default_rng(5).standard_normal((4000, 8))
    Y = X[np.random.default_rng(6).permutation(len(X))]
    assert 0.9 <= clipped_density(X, Y) <= 1.0


@pytest.mark.parametrize("seed", [7, 8, 9])
def test_three_coverage_paths_and_oracle(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.standard_normal((150, 3)), 1)
    Y = np.round(rng.standard_normal((150, 3)) * 1.3, 1)
    ref = reference_metrics(X, Y, 5)
    knn = clipped_coverage_unnorm(X, Y, method="knn")
    radius = clipped_coverage_unnorm(X, Y, method="radius")
    fused = clipped_scores(X, Y).clipped_coverage_unnorm
    assert knn == radius == fused
    assert knn == pytest.approx(ref["clipped_coverage_unnorm"], abs=1e-12)
    assert clipped_density_unnorm(X, Y) == pytest.approx(ref["clipped_density_unnorm"], abs=1e-12)
    assert clipped_density_real(X) == pytest.approx(ref["clipped_density_real"], abs=1e-12)


def test_linear_degradation_exact():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((200, 3))
    good = rng.standard_normal((150, 3))
    bad = rng.standard_normal((50, 3)) + 1e3
    mixed = np.concatenate([good, bad])
    assert clipped_density_unnorm(X, mixed) == pytest.approx(
        150 / 200 * clipped_density_unnorm(X, good), abs=1e-15
    )


def test_clipping_never_increases_contribution():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((300, 2))
    Y = rng.standard_normal((300, 2))
    idx = NeighborIndex(X)
    r = clipped_radii(X, 5, index=idx)
    clipped, _ = idx.ball_counts(Y, r.radii)
    full, _ = idx.ball_counts(Y, r.nnd)
    assert np.all(clipped <= full)
    assert clipped_density_unnorm(X, Y) <= density(X, Y)


def test_unknown_coverage_method():
    X = np.zeros((3, 1)) + line(0, 1, 2)
    with pytest.raises(ValueError, match="method"):
        clipped_coverage_unnorm(X, X, 1, method="fast")


sets = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


@given(sets, st.integers(1, 4))
def test_bounds_permutation_translation(rng, k):
    X = rng.integers(-4, 5, (int(rng.integers(6, 40)), 2)).astype(float)
    Y = rng.integers(-4, 5, (int(rng.integers(6, 40)), 2)).astype(float)
    base = (clipped_density_unnorm(X, Y, k), clipped_density_real(X, k), clipped_coverage_unnorm(X, Y, k))
    assert all(0.0 <= v <= 1.0 for v in base)
    px, py = rng.permutation(len(X)), rng.permutation(len(Y))
    assert (
        clipped_density_unnorm(X[px], Y[py], k),
        clipped_density_real(X[px], k),
        clipped_coverage_unnorm(X[px], Y[py], k),
    ) == base
    shift = np.array([-11.0, 2.0])
    assert (
        clipped_density_unnorm(X + shift, Y + shift, k),
        clipped_density_real(X + shift, k),
        clipped_coverage_unnorm(X + shift, Y + shift, k),
    ) == base
