"""Estimator front end: fit on the real set, evaluate any number of synthetic sets.

Every metric is derived from a handful of shared neighbour passes:

* real kNN table (radii, clipped radii, clipped-ball members),
* synthetic queries against real balls (precision, density, coverage and the
  clipped fidelity / coverage counts come out of one pass),
* synthetic kNN table plus real queries against synthetic balls (recall and the
  role-swapped precision),
* the calibration curve for Clipped Coverage.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baseline import improved_recall, synth_ball_counts
from .calibration import G_MODES, apply_g, cached_calibration_table
from .clipped import _radii_from_table, capped_mean, density_real_from_radii, normalize_density, real_neighbors
from .core import check_features, check_k
from .neighbors import NeighborIndex, resolve_backend

METRICS = (
    "iprecision",
    "irecall",
    "density",
    "coverage",
    "sym_precision",
    "sym_recall",
    "clipped_density",
    "clipped_density_unnorm",
    "clipped_coverage_unnorm",
    "clipped_coverage",
)
# selectable by name, but not part of "all": a property of the real set alone
DIAGNOSTICS = ("clipped_density_real",)

# neighbour passes each metric depends on
_STAGES = {
    "iprecision": ("real_knn", "real_balls"),
    "irecall": ("synth_balls",),
    "density": ("real_knn", "real_balls"),
    "coverage": ("real_knn", "real_balls"),
    "sym_precision": ("real_knn", "real_balls", "synth_balls"),
    "sym_recall": ("real_knn", "real_balls", "synth_balls"),
    "clipped_density": ("real_knn", "real_balls"),
    "clipped_density_unnorm": ("real_knn", "real_balls"),
    "clipped_density_real": ("real_knn",),
    "clipped_coverage_unnorm": ("real_knn", "real_balls"),
    "clipped_coverage": ("real_knn", "real_balls", "calibration"),
}

SCHEMA_VERSION = 1


def parse_metrics(metrics):
    """Normalise a metric selection (``"all"``, comma string or iterable)."""
    if metrics is None or metrics == "all":
        return list(METRICS)
    if isinstance(metrics, str):
        metrics = [m.strip() for m in metrics.split(",") if m.strip()]
    metrics = list(dict.fromkeys(metrics))
    unknown = [m for m in metrics if m not in METRICS + DIAGNOSTICS]
    if unknown:
        raise ValueError(f"unknown metric(s) {unknown}; valid names: {', '.join(METRICS + DIAGNOSTICS)}")
    if not metrics:
        raise ValueError("empty metric selection")
    return metrics


@dataclass
class MetricReport:
    values: dict
    N: int
    M: int
    k: int
    backend: str
    seed: int | None = None
    timings: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def __getitem__(self, name):
        return self.values[name]

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def csv_rows(self):
        return [(name, value) for name, value in self.values.items()]


class ClippedDensityCoverage(BaseEstimator):
    """Fidelity and coverage of synthetic samples relative to a real sample set.

    Parameters
    ----------
    k : int, default=5
        Neighbour count defining every k-NN ball.
    backend : {"auto", "tree", "brute"}, default="auto"
        Neighbour engine. ``"auto"`` uses the kd-tree for low-dimensional sets
        of at least 512 points and brute force otherwise; both are exact.
    leaf_size : int, default=32
    g_mode : {"interp", "step"}, default="interp"
        Inversion of the Clipped Coverage calibration curve.
    cache_dir : str or None
        Directory for cached calibration tables.

    Attributes
    ----------
    index_ : NeighborIndex
    radii_ : ClippedRadii
    clipped_density_real_ : float
        Leave-one-out clipped fidelity of the real set (Clipped Density normaliser).
    n_features_in_ : int
    n_samples_fit_ : int

    Examples
    --------
    >>> est = ClippedDensityCoverage(k=5).fit(real)          # doctest: +SKIP
    >>> est.evaluate(synth)["clipped_coverage"]              # doctest: +SKIP
    """

    def __init__(self, k=5, backend="auto", leaf_size=32, g_mode="interp", cache_dir=None):
        self.k = k
        self.backend = backend
        self.leaf_size = leaf_size
        self.g_mode = g_mode
        self.cache_dir = cache_dir

    def fit(self, X, y=None):
        X = check_features(X, "real")
        k = check_k(self.k, X.shape[0], "fit", "real samples")
        if self.g_mode not in G_MODES:
            raise ValueError(f"unknown g_mode {self.g_mode!r}; choose from {G_MODES}")
        timings = {}
        t0 = time.perf_counter()
        self.index_ = NeighborIndex(X, backend=self.backend, leaf_size=self.leaf_size)
        table = real_neighbors(self.index_, k)
        self.radii_ = _radii_from_table(self.index_, table, k)
        timings["real_knn"] = time.perf_counter() - t0
        self.clipped_density_real_ = density_real_from_radii(self.radii_, k)
        self.n_samples_fit_, self.n_features_in_ = X.shape
        self.fit_timings_ = timings
        return self

    @property
    def nnd_(self):
        return self.radii_.nnd

    def _check_synth(self, Y):
        check_is_fitted(self, "radii_")
        Y = check_features(Y, "synth")
        if Y.shape[1] != self.n_features_in_:
            raise ValueError(
                f"dimension mismatch: fitted on {self.n_features_in_} features, synth has {Y.shape[1]}"
            )
        return Y

    def real_ball_counts(self, Y):
        """Per synthetic sample ``(#real balls, #clipped real balls)`` holding it,
        and per real ball ``(#synthetic samples, #synthetic samples in clipped ball)``."""
        Y = self._check_synth(Y)
        radii = np.column_stack([self.radii_.nnd, self.radii_.radii])
        return self.index_.ball_counts(Y, radii)

    def score_samples(self, Y):
        """Clipped fidelity of each synthetic sample, ``min(#clipped balls / k, 1)``."""
        per_synth, _ = self.real_ball_counts(Y)
        return np.minimum(per_synth[:, 1], self.k) / self.k

    def score(self, X, y=None):
        """Clipped Density of ``X`` (higher is better)."""
        return self.evaluate(X, metrics=["clipped_density"])["clipped_density"]

    def evaluate(self, Y, metrics="all", seed=None):
        """Score one synthetic set; returns a :class:`MetricReport`."""
        Y = self._check_synth(Y)
        names = parse_metrics(metrics)
        k = int(self.k)
        N, M = self.n_samples_fit_, Y.shape[0]
        for name in names:
            if "synth_balls" in _STAGES[name]:
                check_k(k, M, name, "synthetic samples")
        stages = dict(self.fit_timings_)
        needed = {s for name in names for s in _STAGES[name]}

        if "real_balls" in needed:
            t0 = time.perf_counter()
            per_synth, per_real = self.real_ball_counts(Y)
            stages["real_balls"] = time.perf_counter() - t0
        if "synth_balls" in needed:
            t0 = time.perf_counter()
            synth_index = NeighborIndex(Y, backend=self.backend, leaf_size=self.leaf_size)
            real_hits, synth_hits = synth_ball_counts(self.index_.points, Y, k, index=synth_index)
            stages["synth_balls"] = time.perf_counter() - t0
        if "calibration" in needed:
            t0 = time.perf_counter()
            table = cached_calibration_table(N, M, k, self.cache_dir)
            stages["calibration"] = time.perf_counter() - t0

        values = {}
        for name in names:
            if name == "iprecision":
                v = np.count_nonzero(per_synth[:, 0]) / M
            elif name == "irecall":
                v = np.count_nonzero(real_hits) / N
            elif name == "density":
                v = per_synth[:, 0].sum() / (k * M)
            elif name == "coverage":
                v = np.count_nonzero(per_real[:, 0]) / N
            elif name == "sym_precision":
                v = min(np.count_nonzero(per_synth[:, 0]) / M, np.count_nonzero(synth_hits) / M)
            elif name == "sym_recall":
                v = min(np.count_nonzero(real_hits) / N, np.count_nonzero(per_real[:, 0]) / N)
            elif name == "clipped_density_unnorm":
                v = capped_mean(per_synth[:, 1], k)
            elif name == "clipped_density_real":
                v = self.clipped_density_real_
            elif name == "clipped_density":
                v = normalize_density(capped_mean(per_synth[:, 1], k), self.clipped_density_real_)
            elif name == "clipped_coverage_unnorm":
                v = capped_mean(per_real[:, 0], k)
            else:  # clipped_coverage
                v = apply_g(table, capped_mean(per_real[:, 0], k), self.g_mode)
            values[name] = float(v)

        timings = {name: sum(stages.get(s, 0.0) for s in _STAGES[name]) for name in names}
        return MetricReport(
            values=values,
            N=N,
            M=M,
            k=k,
            backend=self.index_.backend,
            seed=seed,
            timings=timings,
        )


def compute_metrics(real, synth, k=5, metrics="all", backend="auto", g_mode="interp", cache_dir=None, seed=None):
    """One-shot helper: fit on ``real`` and evaluate ``synth``.

    A ``k`` too large for a requested metric raises :class:`KRangeError`
    naming that metric.
    """
    names = parse_metrics(metrics)
    real = check_features(real, "real")
    synth = check_features(synth, "synth")
    for name in names:
        if _STAGES[name] != ("synth_balls",):
            check_k(k, len(real), name, "real samples")
        if "synth_balls" in _STAGES[name]:
            check_k(k, len(synth), name, "synthetic samples")
    if names == ["irecall"]:
        # recall alone never needs the real-side balls
        t0 = time.perf_counter()
        value = improved_recall(real, synth, k, backend)
        elapsed = time.perf_counter() - t0
        resolved = resolve_backend(backend, len(synth), synth.shape[1])
        return MetricReport({"irecall": value}, len(real), len(synth), k, resolved, seed, {"irecall": elapsed})
    est = ClippedDensityCoverage(k=k, backend=backend, g_mode=g_mode, cache_dir=cache_dir).fit(real)
    return est.evaluate(synth, names, seed=seed)
