"""Analytic calibration of Clipped Coverage.

Under identical real and synthetic distributions, the number of synthetic
samples inside a real sample's k-NN ball is Beta-Binomial(M, k, N - k). With
``m`` in-distribution synthetic samples (the rest lying in no ball) the
expected unnormalised Clipped Coverage is therefore

    f(m) = sum_{j=1}^{m} min(j/k, 1) C(m, j) B(k + j, m - j + N - k) / B(k, N - k)

and the calibrated score inverts this curve so that ``m`` good samples out of
``M`` map back to ``m / M``.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import check_k

logger = logging.getLogger(__name__)

G_MODES = ("interp", "step")


class LogGammaTable:
    """``log Gamma(l)`` for integer ``l = 1 .. N + M + 1``."""

    def __init__(self, N, M):
        self.N = int(N)
        self.M = int(M)
        size = self.N + self.M + 2
        # values[l] = log Gamma(l); index 0 is unused (pole)
        self.values = np.empty(size)
        self.values[0] = np.inf
        self.values[1:] = gammaln(np.arange(1, size, dtype=np.float64))

    def log_gamma(self, l):
        return self.values[l]

    def log_beta(self, a, b):
        v = self.values
        return v[a] + v[b] - v[np.asarray(a) + np.asarray(b)]

    def log_binom(self, n, k):
        v = self.values
        n = np.asarray(n)
        k = np.asarray(k)
        return v[n + 1] - v[k + 1] - v[n - k + 1]


def _check_args(N, M, k, m):
    N, M = int(N), int(M)
    k = check_k(k, N, "clipped_coverage", "real samples")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if not 0 <= m <= M:
        raise ValueError(f"m must be in [0, {M}], got {m}")
    return N, M, k, int(m)


def expected_clipped_coverage(N, M, k, m, table=None):
    """Expected unnormalised Clipped Coverage with ``m`` good synthetic samples.

    Direct evaluation of the Beta-Binomial weighted sum, O(m) terms, each
    formed in log space and exponentiated before summation.
    """
    N, M, k, m = _check_args(N, M, k, m)
    if m == 0:
        return 0.0
    lg = table if table is not None else LogGammaTable(N, M)
    j = np.arange(1, m + 1)
    logt = lg.log_binom(m, j) + lg.log_beta(k + j, m - j + N - k) - lg.log_beta(k, N - k)
    # exp underflows to exactly 0 below ~e^-745; those terms drop out
    terms = np.minimum(j / k, 1.0) * np.exp(logt)
    return float(terms.sum())


def _survival_f(N, k, m):
    """Vectorised over an array ``m`` of good-sample counts.

    The first ``k`` Beta-Binomial(m, k, N - k) probabilities come from
    ``P(0) = prod_{i=1..k} (N - i) / (m + N - i)`` and the term ratio
    ``P(t+1) / P(t) = (m - t)(k + t) / ((t + 1)(m - t - 1 + N - k))``, summed in
    log space. Only logs of moderate numbers appear, so there is no
    cancellation between huge log-gamma values.
    """
    m = np.asarray(m, dtype=np.float64)
    logp = np.zeros(m.shape)
    for i in range(1, k + 1):
        logp += math.log(N - i) - np.log(m + N - i)
    deficit = k * np.exp(logp)
    for t in range(k - 1):
        ok = m > t
        step = np.full(m.shape, -np.inf)
        mt = m[ok]
        step[ok] = np.log(mt - t) - math.log(t + 1) + math.log(k + t) - np.log(mt - t - 1 + N - k)
        logp = logp + step
        deficit += (k - t - 1) * np.exp(logp)
    # sum_{k'=1}^{k} P(C >= k') = k - sum_{t<k} (k - t) P(C = t)
    return 1.0 - deficit / k


def expected_clipped_coverage_survival(N, M, k, m):
    """Same expectation through Beta-Binomial tail probabilities.

    ``(1/k) sum_{k'=1}^{k} P(C >= k')`` needs only the first ``k`` pmf values,
    so it costs O(k) per ``m`` instead of O(m).
    """
    N, M, k, m = _check_args(N, M, k, m)
    if m == 0:
        return 0.0
    return float(_survival_f(N, k, np.array([m]))[0])


@dataclass(frozen=True)
class CalibrationTable:
    """Expected-score curve ``f[m]`` for ``m = 0..M`` at fixed ``(N, M, k)``."""

    N: int
    M: int
    k: int
    f: np.ndarray

    @property
    def knots(self):
        """Good-sample proportions ``m / M`` matching each ``f[m]``."""
        return np.arange(self.M + 1) / self.M

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["m", "f_expected"])
            for m, v in enumerate(self.f):
                writer.writerow([m, repr(float(v))])

    @classmethod
    def from_csv(cls, path, N, M, k):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["m", "f_expected"]:
            raise ValueError("bad calibration header")
        body = rows[1:]
        if len(body) != M + 1:
            raise ValueError(f"expected {M + 1} rows, found {len(body)}")
        ms = [int(r[0]) for r in body]
        if ms != list(range(M + 1)):
            raise ValueError("m column is not 0..M")
        f = np.array([float(r[1]) for r in body])
        if not np.all(np.isfinite(f)) or f[0] != 0.0 or np.any(np.diff(f) <= 0) or f[-1] > 1.0:
            raise ValueError("f_expected column is not a valid calibration curve")
        return cls(N=N, M=M, k=k, f=f)


def build_calibration_table(N, M, k):
    """Tabulate ``f[m]`` for all ``m`` with the O(Mk) tail-probability formula."""
    N, M, k, _ = _check_args(N, M, k, 0)
    f = _survival_f(N, k, np.arange(M + 1))
    f[0] = 0.0
    return CalibrationTable(N=N, M=M, k=k, f=f)


def _cache_path(cache_dir, N, M, k):
    return os.path.join(cache_dir, f"calibration_N{N}_M{M}_k{k}.csv")


def cached_calibration_table(N, M, k, cache_dir=None):
    """Build a table, reading/writing ``cache_dir`` when given.

    A cache file that fails validation is ignored and rebuilt.
    """
    if cache_dir is None:
        return build_calibration_table(N, M, k)
    path = _cache_path(cache_dir, int(N), int(M), int(k))
    if os.path.exists(path):
        try:
            return CalibrationTable.from_csv(path, int(N), int(M), int(k))
        except (ValueError, IndexError, OSError) as exc:
            logger.warning("ignoring corrupted calibration cache %s: %s", path, exc)
    table = build_calibration_table(N, M, k)
    os.makedirs(cache_dir, exist_ok=True)
    tmp = path + ".tmp"
    table.to_csv(tmp)
    os.replace(tmp, path)
    return table


def apply_g(table, s, mode="interp"):
    """Map an observed unnormalised Clipped Coverage to a good-sample proportion.

    ``g(f[m]) = m / M`` exactly. Between knots ``mode="interp"`` interpolates
    linearly; ``mode="step"`` returns the largest knot not above ``s``.
    Scores beyond ``f[M]`` map to 1.
    """
    if mode not in G_MODES:
        raise ValueError(f"unknown g mode {mode!r}; choose from {G_MODES}")
    s = float(s)
    if s < -1e-9 or s > 1.0 + 1e-9:
        warnings.warn(f"score {s!r} outside [0, 1]; clamping", RuntimeWarning, stacklevel=2)
    s = min(max(s, 0.0), 1.0)
    f = table.f
    if s >= f[-1]:
        return 1.0
    if mode == "step":
        m = int(np.searchsorted(f, s, side="right")) - 1
        return m / table.M
    return float(np.interp(s, f, table.knots))


def clipped_coverage_from_unnorm(unnorm, N, M, k, mode="interp", cache_dir=None):
    return apply_g(cached_calibration_table(N, M, k, cache_dir), unnorm, mode)


def clipped_coverage(real, synth, k=5, backend="auto", g_mode="interp", cache_dir=None):
    """Calibrated Clipped Coverage, ``g(ClippedCoverage_unnorm)``."""
    from .clipped import clipped_coverage_unnorm

    unnorm = clipped_coverage_unnorm(real, synth, k, backend=backend)
    return clipped_coverage_from_unnorm(unnorm, len(real), len(synth), k, g_mode, cache_dir)
