import json

import numpy as np
import pytest

from clipmetrics import METRICS
from clipmetrics.cli import main


@pytest.fixture
def inputs(tmp_path):
    rng = np.random.default_rng(0)
    r, s = tmp_path / "r.npy", tmp_path / "s.npy"
    np.save(r, rng.standard_normal((200, 3)))
    np.save(s, rng.standard_normal((150, 3)))
    return r, s


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_compute_all(capsys, inputs):
    r, s = inputs
    code, out, err = run(capsys, "compute", "--real", r, "--synth", s, "--k", 5, "--metrics", "all")
    assert code == 0
    doc = json.loads(out)
    assert sorted(doc["values"]) == sorted(METRICS) and len(doc["values"]) == 10
    assert doc["schema"] == 1
    m = doc["manifest"]
    assert m["command"] == "compute" and m["seed"] == 0 and len(m["inputs"]["real"]) == 64
    assert set(m) == {"command", "flags", "inputs", "version", "seed", "timings"}


def test_compute_two_metrics_and_determinism(capsys, inputs):
    r, s = inputs
    args = ["compute", "--real", r, "--synth", s, "--metrics", "clipped_density,clipped_coverage"]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    da, db = json.loads(a), json.loads(b)
    assert sorted(da["values"]) == ["clipped_coverage", "clipped_density"]
    assert da["values"] == db["values"]
    da["manifest"].pop("timings"), db["manifest"].pop("timings")
    assert da["manifest"] == db["manifest"]


def test_compute_csv_with_sidecar(capsys, inputs, tmp_path):
    r, s = inputs
    out = tmp_path / "o.csv"
    code, stdout, _ = run(capsys, "compute", "--real", r, "--synth", s, "--format", "csv", "--out", out)
    assert code == 0 and stdout == ""
    lines = out.read_text().splitlines()
    assert lines[0] == "metric,value" and len(lines) == 11
    assert json.loads((tmp_path / "o.csv.manifest.json").read_text())["command"] == "compute"


def test_compute_csv_inputs(capsys, tmp_path):
    rng = np.random.default_rng(1)
    for name, n in (("r.csv", 30), ("s.csv", 20)):
        rows = "\n".join(",".join(repr(float(v)) for v in row) for row in rng.standard_normal((n, 2)))
        (tmp_path / name).write_text("x,y\n" + rows + "\n")
    code, out, _ = run(
        capsys, "compute", "--real", tmp_path / "r.csv", "--synth", tmp_path / "s.csv", "--csv-header",
        "--metrics", "coverage", "--g-mode", "step", "--backend", "tree",
    )
    assert code == 0 and "coverage" in json.loads(out)["values"]


def test_compute_errors(capsys, inputs, tmp_path):
    r, s = inputs
    code, out, err = run(capsys, "compute", "--real", r, "--synth", s, "--k", 150, "--metrics", "irecall")
    assert code != 0 and out == "" and "irecall" in err
    code, _, err = run(capsys, "compute", "--real", tmp_path / "missing.npy", "--synth", s)
    assert code != 0 and "error" in err
    bad = tmp_path / "f.npy"
    np.save(bad, np.asfortranarray(np.ones((4, 3))))
    code, _, err = run(capsys, "compute", "--real", bad, "--synth", s)
    assert code != 0 and "unsupported layout" in err


def test_threads_flag_values_unchanged(capsys, inputs):
    r, s = inputs
    _, a, _ = run(capsys, "compute", "--real", r, "--synth", s, "--threads", 1)
    _, b, _ = run(capsys, "compute", "--real", r, "--synth", s, "--threads", 64)
    assert json.loads(a)["values"] == json.loads(b)["values"]


def test_bench_rows_and_rerun(capsys, tmp_path):
    args = [
        "bench", "--scenario", "ood_proportion", "--steps", 6, "--repeats", 2, "--seed", 7,
        "--n-real", 200, "--n-synth", 200, "--dim", 3, "--metrics", "coverage,clipped_coverage",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *args, "--out", a)[0] == 0
    assert run(capsys, *args, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 6 * 2 * 2


def test_bench_all_metrics_row_count(capsys):
    code, out, _ = run(
        capsys, "bench", "--scenario", "identical_null", "--steps", 2, "--repeats", 1,
        "--n-real", 100, "--n-synth", 100, "--dim", 2,
    )
    assert code == 0 and len(out.splitlines()) == 1 + 2 * 1 * 10


def test_bench_json(capsys):
    code, out, _ = run(
        capsys, "bench", "--scenario", "translation", "--steps", 2, "--repeats", 1, "--n-real", 100,
        "--n-synth", 100, "--dim", 2, "--metrics", "density", "--format", "json",
    )
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2 and doc["manifest"]["command"] == "bench"


def test_bench_unknown_scenario(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--scenario", "nope"])
    assert exc.value.code != 0
    err = capsys.readouterr().err
    assert "ood_proportion" in err and "translation" in err


def test_calibrate(capsys, tmp_path):
    code, out, _ = run(capsys, "calibrate", "--N", 2, "--M", 2, "--k", 1)
    rows = [line.split(",") for line in out.splitlines()]
    assert code == 0 and rows[0] == ["m", "f_expected"]
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx([0, 0.5, 2 / 3], abs=1e-15)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "calibrate", "--N", 40, "--M", 30, "--k", 5, "--out", a)
    run(capsys, "calibrate", "--N", 40, "--M", 30, "--k", 5, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    f = [float(line.split(",")[1]) for line in a.read_text().splitlines()[1:]]
    assert np.all(np.diff(f) > 0)
    code, _, err = run(capsys, "calibrate", "--N", 3, "--M", 3, "--k", 3)
    assert code != 0 and "k=3" in err


def test_selftest_quick(capsys):
    code, out, err = run(capsys, "selftest", "--quick")
    assert code == 0 and out == ""
    assert "all suites passed" in err


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "clipmetrics", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
