import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from capx import corpus
from capx.cli import main


@pytest.fixture(scope="module")
def weights(tmp_path_factory):
    path = tmp_path_factory.mktemp("w") / "model.cxw"
    assert main(["gen-weights", "--seed", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture
def frames_dir(tmp_path):
    d = tmp_path / "in"
    corpus.write_corpus(d, seed=5, count=3, width=160, height=120)
    return d


def test_analyze_writes_results(tmp_path, frames_dir, weights):
    out = tmp_path / "out"
    code = main(["analyze", "--input", str(frames_dir), "--out", str(out), "--weights", str(weights),
                 "--executor", "worker-per-core", "--workers", "2"])
    assert code == 0
    results = json.loads((out / "results.json").read_text())
    assert [r["frame_id"] for r in results] == ["frame_0000", "frame_0001", "frame_0002"]
    assert all(0.0 <= r["density"] <= 1.0 for r in results)
    assert sorted(p.name for p in out.glob("*.png")) == [f"frame_000{i}.png" for i in range(3)]


def test_analyze_executors_agree(tmp_path, frames_dir, weights):
    outs = {}
    for kind in ("serial", "master-slave"):
        out = tmp_path / kind
        assert main(["analyze", "--input", str(frames_dir), "--out", str(out), "--weights", str(weights),
                     "--executor", kind]) == 0
        outs[kind] = [(r["density"], r["regions"]) for r in json.loads((out / "results.json").read_text())]
    assert outs["serial"] == outs["master-slave"]


def test_analyze_missing_weights(tmp_path, frames_dir, capsys):
    missing = tmp_path / "nope.cxw"
    assert main(["analyze", "--input", str(frames_dir), "--out", str(tmp_path / "o"),
                 "--weights", str(missing)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_analyze_empty_dir(tmp_path, weights, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["analyze", "--input", str(tmp_path / "empty"), "--out", str(tmp_path / "o"),
                 "--weights", str(weights)]) == 1
    assert "no input frames" in capsys.readouterr().err


def test_analyze_serial_rejects_workers(tmp_path, frames_dir, weights):
    assert main(["analyze", "--input", str(frames_dir), "--out", str(tmp_path / "o"),
                 "--weights", str(weights), "--executor", "serial", "--workers", "4"]) == 1


def test_analyze_partial_failure(tmp_path, frames_dir, weights):
    (frames_dir / "frame_0001.png").write_bytes(b"garbage")
    out = tmp_path / "out"
    assert main(["analyze", "--input", str(frames_dir), "--out", str(out), "--weights", str(weights),
                 "--executor", "serial"]) == 2
    results = {r["frame_id"]: r for r in json.loads((out / "results.json").read_text())}
    assert "error" in results["frame_0001"]
    assert "density" in results["frame_0000"] and "density" in results["frame_0002"]


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["analyze"]) == 1
    assert main(["bench", "--cores", "4096", "--frames", "1"]) == 1
    assert "4096" in capsys.readouterr().err


def test_bench_writes_report(tmp_path, capsys):
    report = tmp_path / "r.json"
    code = main(["bench", "--frames", "2", "--size", "96x80", "--cores", "1", "--executors",
                 "serial,worker-per-core", "--report", str(report), "--input", str(tmp_path / "cache")])
    assert code == 0
    data = json.loads(report.read_text())
    assert [(r["executor"], r["cores"]) for r in data["rows"]] == [("serial", 1), ("worker_per_core", 1)]
    assert "avg_et" in capsys.readouterr().out
    assert (tmp_path / "cache" / "manifest.json").exists()


def test_gen_weights_deterministic(tmp_path):
    a, b = tmp_path / "a.cxw", tmp_path / "b.cxw"
    assert main(["gen-weights", "--seed", "42", "--out", str(a)]) == 0
    assert main(["gen-weights", "--seed", "42", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes()[:4] == b"CXW1"


def test_gen_corpus(tmp_path):
    out = tmp_path / "c"
    assert main(["gen-corpus", "--seed", "42", "--count", "5", "--size", "64x48", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["count"] == 5 and len(list(out.glob("*.png"))) == 5
    again = tmp_path / "d"
    main(["gen-corpus", "--seed", "42", "--count", "5", "--size", "64x48", "--out", str(again)])
    for name in manifest["files"]:
        a = np.asarray(Image.open(out / name))
        assert np.array_equal(a, np.asarray(Image.open(again / name)))
    assert main(["gen-corpus", "--count", "0", "--out", str(tmp_path / "z")]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "capx", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gen-corpus" in proc.stdout
