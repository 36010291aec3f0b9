"""Built-in consistency checks: backend agreement, formula agreement, oracle agreement."""
from __future__ import annotations

import os
import tempfile
import time

import numpy as np

from .calibration import (
    build_calibration_table,
    cached_calibration_table,
    expected_clipped_coverage,
    expected_clipped_coverage_survival,
    LogGammaTable,
)
from .estimator import DIAGNOSTICS, METRICS, compute_metrics
from .neighbors import NeighborIndex
from .reference import reference_metrics

ALL = list(METRICS + DIAGNOSTICS)


def _instances(count, seed, max_n=300, max_d=8):
    rng = np.random.default_rng(seed)
    for trial in range(count):
        N = int(rng.integers(8, max_n + 1))
        M = int(rng.integers(8, max_n + 1))
        d = int(rng.integers(1, max_d + 1))
        k = int(rng.choice([1, 2, 5]))
        X = rng.standard_normal((N, d))
        Y = rng.standard_normal((M, d))
        if trial % 3 == 0:
            # coarse grid: many exact ties
            X, Y = np.round(X, 1), np.round(Y, 1)
        yield X, Y, k


def suite_backends(quick=False):
    """Tree and brute force give identical neighbour tables and metric values."""
    failures = []
    for i, (X, Y, k) in enumerate(_instances(8 if quick else 40, 11)):
        tree = NeighborIndex(X, backend="tree", leaf_size=8)
        brute = NeighborIndex(X, backend="brute")
        a = tree.knn(None, k=k, exclude_self=True)
        b = brute.knn(None, k=k, exclude_self=True)
        if not (np.array_equal(a.sq_distances, b.sq_distances) and np.array_equal(a.indices, b.indices)):
            failures.append(f"instance {i}: knn tables differ")
        va = compute_metrics(X, Y, k, ALL, backend="tree").values
        vb = compute_metrics(X, Y, k, ALL, backend="brute").values
        if va != vb:
            failures.append(f"instance {i}: metric values differ")
    return failures


def suite_formulas(quick=False):
    """Direct and tail-probability forms of the calibration curve agree."""
    failures = []
    sizes = (2, 5, 10) if quick else (2, 5, 10, 50, 200)
    for N in sizes:
        for M in sizes:
            lg = LogGammaTable(N, M)
            for k in (1, 2, 5):
                if k >= N:
                    continue
                table = build_calibration_table(N, M, k)
                for m in range(M + 1):
                    direct = expected_clipped_coverage(N, M, k, m, lg)
                    tail = expected_clipped_coverage_survival(N, M, k, m)
                    if abs(direct - tail) > 1e-10 or abs(table.f[m] - direct) > 1e-10:
                        failures.append(f"N={N} M={M} k={k} m={m}: {direct!r} vs {tail!r}")
    return failures


def suite_oracle(quick=False):
    """Indexed metrics equal the dense pairwise reference."""
    failures = []
    for i, (X, Y, k) in enumerate(_instances(10 if quick else 50, 23)):
        ref = reference_metrics(X, Y, k)
        got = compute_metrics(X, Y, k, ALL, backend="tree").values
        for name, value in ref.items():
            if abs(got[name] - value) > 1e-12:
                failures.append(f"instance {i} {name}: {got[name]!r} vs reference {value!r}")
    return failures


def suite_cache(quick=False):
    """A corrupted calibration cache is ignored and rebuilt."""
    failures = []
    with tempfile.TemporaryDirectory() as cache:
        fresh = build_calibration_table(50, 40, 5)
        path = os.path.join(cache, "calibration_N50_M40_k5.csv")
        with open(path, "w") as fh:
            fh.write("m,f_expected\n0,0.0\n1,garbage\n")
        table = cached_calibration_table(50, 40, 5, cache)
        if not np.array_equal(table.f, fresh.f):
            failures.append("rebuilt table differs from a fresh build")
        again = cached_calibration_table(50, 40, 5, cache)
        if not np.array_equal(again.f, fresh.f):
            failures.append("cached table does not round-trip")
    return failures


SUITES = {
    "backends": suite_backends,
    "formulas": suite_formulas,
    "oracle": suite_oracle,
    "cache": suite_cache,
}


def run_selftest(quick=False, log=None):
    """Run every suite; returns ``{suite: list of failure messages}``."""
    results = {}
    for name, suite in SUITES.items():
        t0 = time.perf_counter()
        failures = suite(quick)
        results[name] = failures
        if log is not None:
            status = "PASS" if not failures else f"FAIL ({len(failures)})"
            log(f"{name:<10s} {status}  {time.perf_counter() - t0:.2f}s")
            for msg in failures[:10]:
                log(f"  {msg}")
    return results
