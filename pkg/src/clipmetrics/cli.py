"""Command-line interface: ``compute``, ``bench``, ``calibrate``, ``selftest``.

Results go to standard output or ``--out``; everything else goes to standard
error. Every output carries a run manifest (command, resolved flags, input
digests, version, seed, timings). JSON reports embed it; CSV outputs get a
``<out>.manifest.json`` sidecar, or the manifest is printed to standard error
when writing CSV to standard output.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field

from . import __version__
from .calibration import G_MODES, build_calibration_table
from .core import MetricConfig
from .estimator import SCHEMA_VERSION, compute_metrics
from .io import load_matrix
from .neighbors import BACKENDS
from .scenarios import SCENARIOS, ScenarioConfig, run_sweep

log = logging.getLogger("clipmetrics")


@dataclass
class RunManifest:
    command: str
    flags: dict
    inputs: dict = field(default_factory=dict)
    version: str = __version__
    seed: int | None = None
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _set_threads(n):
    if n is None:
        return
    import numba

    if n < 1:
        raise ValueError(f"--threads must be >= 1, got {n}")
    limit = numba.config.NUMBA_NUM_THREADS
    if n > limit:
        log.warning("--threads %d exceeds the %d available; using %d", n, limit, limit)
        n = limit
    numba.set_num_threads(n)


def _flags(args):
    return {key: value for key, value in sorted(vars(args).items()) if key not in ("func",)}


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _emit_manifest(manifest, out):
    text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stderr.write(text)
    else:
        with open(out + ".manifest.json", "w") as fh:
            fh.write(text)


# ------------------------------------------------------------------ commands


def cmd_compute(args):
    t0 = time.perf_counter()
    MetricConfig(k=args.k, seed=args.seed, thread_count=args.threads or 1)
    real = load_matrix(args.real, csv_header=args.csv_header)
    synth = load_matrix(args.synth, csv_header=args.csv_header)
    t_load = time.perf_counter() - t0
    report = compute_metrics(
        real,
        synth,
        k=args.k,
        metrics=args.metrics,
        backend=args.backend,
        g_mode=args.g_mode,
        cache_dir=args.cache_dir,
        seed=args.seed,
    )
    manifest = RunManifest(
        command="compute",
        flags=_flags(args),
        inputs={"real": sha256_file(args.real), "synth": sha256_file(args.synth)},
        seed=args.seed,
        timings={"load": t_load, "total": time.perf_counter() - t0, "metrics": dict(report.timings)},
    )
    if args.format == "json":
        doc = report.to_dict()
        doc["manifest"] = manifest.to_dict()
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name, value in report.csv_rows():
            writer.writerow([name, repr(value)])
        _emit(buf.getvalue(), args.out)
        _emit_manifest(manifest, args.out)
    return 0


def cmd_bench(args):
    t0 = time.perf_counter()
    cfg = ScenarioConfig(
        name=args.scenario,
        n_real=args.n_real,
        n_synth=args.n_synth,
        dim=args.dim,
        k=args.k,
        steps=args.steps,
        repeats=args.repeats,
        seed=args.seed,
        param_range=tuple(args.param_range) if args.param_range else None,
        backend=args.backend,
        g_mode=args.g_mode,
    )
    result = run_sweep(cfg, args.metrics)
    manifest = RunManifest(
        command="bench",
        flags=_flags(args),
        seed=args.seed,
        timings={"total": time.perf_counter() - t0},
    )
    if args.format == "json":
        doc = json.loads(result.to_json())
        doc["manifest"] = manifest.to_dict()
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(result.to_csv(), args.out)
        _emit_manifest(manifest, args.out)
    return 0


def cmd_calibrate(args):
    t0 = time.perf_counter()
    table = build_calibration_table(args.N, args.M, args.k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "f_expected"])
    for m, v in enumerate(table.f):
        writer.writerow([m, repr(float(v))])
    _emit(buf.getvalue(), args.out)
    manifest = RunManifest(command="calibrate", flags=_flags(args), timings={"total": time.perf_counter() - t0})
    _emit_manifest(manifest, args.out)
    return 0


def cmd_selftest(args):
    from .selftest import run_selftest

    results = run_selftest(quick=args.quick, log=lambda msg: print(msg, file=sys.stderr))
    failed = [name for name, failures in results.items() if failures]
    print("selftest: " + ("FAIL " + ",".join(failed) if failed else "all suites passed"), file=sys.stderr)
    return 1 if failed else 0


# ------------------------------------------------------------------ parser


def _common(p):
    p.add_argument("--k", type=int, default=5, help="neighbour count (default 5)")
    p.add_argument("--metrics", default="all", help='comma-separated metric names or "all"')
    p.add_argument("--backend", choices=BACKENDS + ("auto",), default="auto")
    p.add_argument("--threads", type=int, default=None, help="worker threads for neighbour queries")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--g-mode", choices=G_MODES, default="interp", help="calibration inversion between knots")


def build_parser():
    parser = argparse.ArgumentParser(prog="clipmetrics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="score a synthetic set against a real set")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    _common(p)
    p.add_argument("--cache-dir", default=None, help="directory for calibration tables")
    p.add_argument("--csv-header", action="store_true", help="skip the first line of CSV inputs")
    p.set_defaults(func=cmd_compute, default_format="json")

    p = sub.add_parser("bench", help="run a synthetic scenario sweep")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--n-real", type=int, default=5000)
    p.add_argument("--n-synth", type=int, default=5000)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--param-range", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    _common(p)
    p.set_defaults(func=cmd_bench, default_format="csv")

    p = sub.add_parser("calibrate", help="tabulate the expected Clipped Coverage curve")
    p.add_argument("--N", type=int, required=True, help="real sample count")
    p.add_argument("--M", type=int, required=True, help="synthetic sample count")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("selftest", help="run built-in consistency suites")
    p.add_argument("--quick", action="store_true", help="small subset (a few seconds)")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "format", "unset") is None:
        args.format = args.default_format
    if hasattr(args, "default_format"):
        del args.default_format
    try:
        _set_threads(getattr(args, "threads", None))
        return args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
