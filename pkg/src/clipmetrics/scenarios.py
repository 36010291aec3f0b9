"""Synthetic stress tests: contamination, mode dropping and translation sweeps.

Every sweep is a pure function of its config. Random draws come from
``default_rng([seed, repeat, stream])`` so that all steps of one repeat share
the same underlying samples (common random numbers) and curves are smooth in
the swept parameter.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .estimator import ClippedDensityCoverage, parse_metrics

SCENARIOS = ("ood_proportion", "matched_ood", "mode_drop_simultaneous", "translation", "identical_null")

N_MODES = 10
MODE_SPACING = 10.0

# default swept interval per scenario
_RANGES = {
    "ood_proportion": (0.0, 1.0),
    "matched_ood": (0.0, 0.25),
    "mode_drop_simultaneous": (0.0, 1.0),
    "translation": (-1.0, 1.0),
}

# independent random streams inside one repeat
_REAL, _SYNTH, _REAL_OOD, _SYNTH_OOD = 0, 1, 2, 3


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n_real: int = 5000
    n_synth: int = 5000
    dim: int = 32
    k: int = 5
    steps: int = 6
    repeats: int = 5
    seed: int = 0
    param_range: tuple | None = None
    backend: str = "auto"
    g_mode: str = "interp"

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}; valid names: {', '.join(SCENARIOS)}")
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        if self.n_real < 2 or self.n_synth < 1 or self.dim < 1:
            raise ValueError("n_real >= 2, n_synth >= 1 and dim >= 1 required")
        if self.name == "mode_drop_simultaneous" and self.dim < 2:
            raise ValueError("mode_drop_simultaneous needs dim >= 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def grid(self):
        """Swept parameter value of every step."""
        if self.name == "identical_null":
            return np.arange(self.steps, dtype=np.float64)
        lo, hi = self.param_range if self.param_range is not None else _RANGES[self.name]
        return np.linspace(lo, hi, self.steps)


def _rng(cfg, repeat, stream, step=None):
    key = [int(cfg.seed), repeat, stream]
    if step is not None:
        key.append(step)
    return np.random.default_rng(key)


def gen_gaussian(n, dim, mean=0.0, seed=0):
    """``n`` i.i.d. unit-variance Gaussian rows shifted by ``mean``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.standard_normal((n, dim)) + np.broadcast_to(np.asarray(mean, dtype=np.float64), (dim,))


def ood_scales(n, seed=0):
    """Per-sample generating std ``sqrt(max(4, (10 + Z)^2))``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal(n)
    return np.sqrt(np.maximum(4.0, (10.0 + z) ** 2))


def gen_ood(n, dim, seed=0):
    """Isotropic Gaussians at the origin, each with its own variance ``max(4, (10 + Z)^2)``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scale = ood_scales(n, rng)
    return rng.standard_normal((n, dim)) * scale[:, None]


def _mix(inlier, outlier, x):
    """First ``n - round(x n)`` inliers followed by ``round(x n)`` outliers."""
    n = len(inlier)
    bad = int(round(x * n))
    return np.concatenate([inlier[: n - bad], outlier[:bad]])


def mode_means(dim):
    """Ten well-separated mode centres.

    Axis points ``10 e_c`` when ``dim >= 10``; otherwise a regular decagon in
    the first two coordinates with neighbouring centres 10 apart.
    """
    means = np.zeros((N_MODES, dim))
    if dim >= N_MODES:
        means[np.arange(N_MODES), np.arange(N_MODES)] = MODE_SPACING
    else:
        radius = MODE_SPACING / (2 * math.sin(math.pi / N_MODES))
        angle = 2 * math.pi * np.arange(N_MODES) / N_MODES
        means[:, 0] = radius * np.cos(angle)
        means[:, 1] = radius * np.sin(angle)
    return means


def _balanced_labels(n):
    return np.arange(n) % N_MODES


def _mode_drop_labels(n, p):
    """Labels after moving a fraction ``p`` of classes 1..9 onto class 0."""
    labels = _balanced_labels(n)
    for c in range(1, N_MODES):
        idx = np.flatnonzero(labels == c)
        labels[idx[: int(round(p * len(idx)))]] = 0
    return labels


def build_sets(cfg, step, param, repeat):
    """Real and synthetic sets of one (step, repeat) cell."""
    N, M, d = cfg.n_real, cfg.n_synth, cfg.dim
    name = cfg.name
    if name == "identical_null":
        return (
            gen_gaussian(N, d, seed=_rng(cfg, repeat, _REAL, step)),
            gen_gaussian(M, d, seed=_rng(cfg, repeat, _SYNTH, step)),
        )
    if name == "ood_proportion":
        real = gen_gaussian(N, d, seed=_rng(cfg, repeat, _REAL))
        synth = _mix(
            gen_gaussian(M, d, seed=_rng(cfg, repeat, _SYNTH)),
            gen_ood(M, d, _rng(cfg, repeat, _SYNTH_OOD)),
            param,
        )
        return real, synth
    if name == "matched_ood":
        real = _mix(gen_gaussian(N, d, seed=_rng(cfg, repeat, _REAL)), gen_ood(N, d, _rng(cfg, repeat, _REAL_OOD)), param)
        synth = _mix(
            gen_gaussian(M, d, seed=_rng(cfg, repeat, _SYNTH)),
            gen_ood(M, d, _rng(cfg, repeat, _SYNTH_OOD)),
            param,
        )
        return real, synth
    if name == "mode_drop_simultaneous":
        means = mode_means(d)
        real = gen_gaussian(N, d, seed=_rng(cfg, repeat, _REAL)) + means[_balanced_labels(N)]
        synth = gen_gaussian(M, d, seed=_rng(cfg, repeat, _SYNTH)) + means[_mode_drop_labels(M, param)]
        return real, synth
    # translation
    real = gen_gaussian(N, d, seed=_rng(cfg, repeat, _REAL))
    real[0] = 3.0
    synth = gen_gaussian(M, d, seed=_rng(cfg, repeat, _SYNTH)) + param
    synth[0] = -3.0
    return real, synth


@dataclass
class SweepResult:
    """Long-format sweep values: one row per (step, repeat, metric)."""

    scenario: str
    params: np.ndarray
    metrics: list
    rows: list
    config: dict

    def values(self, metric):
        """``(steps, repeats)`` array of one metric."""
        steps = len(self.params)
        repeats = self.config["repeats"]
        out = np.full((steps, repeats), np.nan)
        for step, _, repeat, name, value in self.rows:
            if name == metric:
                out[step, repeat] = value
        return out

    def mean(self, metric):
        return self.values(metric).mean(axis=1)

    def summary(self):
        out = []
        for metric in self.metrics:
            vals = self.values(metric)
            ddof = 1 if vals.shape[1] > 1 else 0
            for step, param in enumerate(self.params):
                out.append(
                    {
                        "step": step,
                        "step_param": float(param),
                        "metric": metric,
                        "mean": float(vals[step].mean()),
                        "std": float(vals[step].std(ddof=ddof)),
                    }
                )
        return out

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scenario", "step_param", "repeat", "metric", "value"])
        for _, param, repeat, metric, value in self.rows:
            writer.writerow([self.scenario, repr(float(param)), repeat, metric, repr(float(value))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None):
        doc = {
            "scenario": self.scenario,
            "config": self.config,
            "params": [float(p) for p in self.params],
            "metrics": list(self.metrics),
            "rows": [
                {"step_param": float(p), "repeat": r, "metric": m, "value": float(v)} for _, p, r, m, v in self.rows
            ],
            "summary": self.summary(),
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def run_sweep(cfg, metrics="all"):
    """Score ``metrics`` at every step and repeat of ``cfg``."""
    names = parse_metrics(metrics)
    grid = cfg.grid()
    rows = []
    for repeat in range(cfg.repeats):
        est = None
        fitted_on = None
        for step, param in enumerate(grid):
            real, synth = build_sets(cfg, step, float(param), repeat)
            # several scenarios keep the real set fixed across steps
            if fitted_on is None or not np.array_equal(fitted_on, real):
                est = ClippedDensityCoverage(k=cfg.k, backend=cfg.backend, g_mode=cfg.g_mode).fit(real)
                fitted_on = real
            report = est.evaluate(synth, names)
            for name in names:
                rows.append((step, float(param), repeat, name, report[name]))
    rows.sort(key=lambda r: (r[0], r[2], r[3]))
    return SweepResult(scenario=cfg.name, params=grid, metrics=sorted(names), rows=rows, config=_config_dict(cfg))


def _config_dict(cfg):
    out = asdict(cfg)
    if out["param_range"] is not None:
        out["param_range"] = [float(v) for v in out["param_range"]]
    return out


def _named(name):
    def scenario(cfg, metrics="all"):
        return run_sweep(replace(cfg, name=name), metrics)

    scenario.__name__ = f"scenario_{name}"
    return scenario


scenario_ood_proportion = _named("ood_proportion")
scenario_matched_ood = _named("matched_ood")
scenario_mode_drop = _named("mode_drop_simultaneous")
scenario_translation = _named("translation")
scenario_identical_null = _named("identical_null")
