import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from capx import bench, corpus
from capx.engine import BatchStats, TaskSpec, host_slots, make_executor, run_tasks
from capx.errors import ConfigError, DomainError
from capx.pipeline import PipelineConfig

import engine_tasks as tasks
from test_engine import SMALL, small_frames


@pytest.mark.parametrize("slower,faster,expected", [
    (1.0, 0.22, 78.0),
    (0.25, 0.22, 12.0),
    (0.56, 0.32, 42.857142857142854),
    (1.0, 1.0, 0.0),
])
def test_percent_faster_values(slower, faster, expected):
    assert bench.percent_faster(slower, faster) == pytest.approx(expected, abs=1e-9)


def test_percent_faster_negative_and_domain():
    assert bench.percent_faster(1.0, 1.5) == pytest.approx(-50.0)
    for bad in (0.0, -1.0):
        with pytest.raises(DomainError):
            bench.percent_faster(bad, 0.5)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_percent_faster_complement(a, b):
    # time saved plus time remaining is the whole of the slower run
    assert bench.percent_faster(a, b) + 100.0 * b / a == pytest.approx(100.0, rel=1e-9)


def _stats(samples, total):
    return BatchStats("worker_per_core", 4, [0.1], total, samples)


def test_cpu_usage_profile_weights_by_time():
    assert bench.cpu_usage_profile(_stats([(50.0, 4), (100.0, 4)], 0.1)) == pytest.approx(4.0)
    # 4 busy for the first 50 ms, 2 busy for the remaining 150 ms
    assert bench.cpu_usage_profile(_stats([(50.0, 4), (100.0, 2)], 0.2)) == pytest.approx(2.5)
    assert bench.cpu_usage_profile(_stats([(0.0, 1)], 0.0)) == 1.0
    with pytest.raises(ValueError):
        bench.cpu_usage_profile(_stats([], 1.0))


def test_realtime_flag():
    ok = bench.realtime_flag(0.5, 4)
    assert ok["ok"] and ok["host_qualifies"] and ok["limit_s"] == 1.0
    slow = bench.realtime_flag(1.2, 2)
    assert not slow["ok"] and not slow["host_qualifies"]


def test_faster_pairs():
    rows = [bench.BenchRow("serial", 1, 4, 1.0, 4.0, 1.0),
            bench.BenchRow("master_slave", 4, 4, 0.56, 2.2, 2.0),
            bench.BenchRow("worker_per_core", 4, 4, 0.32, 1.3, 4.0)]
    pairs = {(p["slower"], p["faster"]): p["percent"] for p in bench.faster_pairs(rows)}
    assert pairs[("serial", "worker_per_core")] == pytest.approx(68.0)
    assert pairs[("master_slave", "worker_per_core")] == pytest.approx(42.857142857142854)


@pytest.fixture(scope="module")
def small_report(model42):
    return bench.speedup_curve(small_frames(4), [1, 2], ["serial", "worker_per_core"], model42,
                               SMALL, host=2, interval=0.01)


def test_speedup_curve_structure(small_report):
    keys = [(r.executor, r.cores) for r in small_report.rows]
    assert keys == [("serial", 1), ("worker_per_core", 1), ("worker_per_core", 2)]
    assert all(r.frames == 4 for r in small_report.rows)
    assert small_report.host["slots"] == 2
    assert small_report.realtime["frame_size"] == [40, 32]
    assert {(p["slower"], p["cores"]) for p in small_report.faster} == {("serial", 1), ("serial", 2)}


def test_avg_et_is_mean_completion_interval(small_report):
    for r in small_report.rows:
        assert len(r.per_frame_s) == r.frames
        assert abs(r.avg_et_s - sum(r.per_frame_s) / r.frames) <= 1e-9
        assert r.avg_et_s * r.frames <= r.total_s + 1e-9
        assert r.latency_s["min"] <= r.latency_s["mean"] <= r.latency_s["max"]


def test_report_round_trips(tmp_path, small_report):
    bench.write_report(small_report, tmp_path / "r.json")
    back = bench.read_report(tmp_path / "r.json")
    assert back.to_dict() == json.loads(json.dumps(small_report.to_dict()))
    bench.write_report(small_report, tmp_path / "r.csv", fmt="csv")
    rows = bench.read_report_csv(tmp_path / "r.csv")
    assert [tuple(r) for r in rows] == [bench.CSV_COLUMNS] * 3
    for got, want in zip(rows, small_report.rows):
        assert got == want.csv_row()
    with pytest.raises(ConfigError):
        bench.write_report(small_report, tmp_path / "r.xml", fmt="xml")


def test_unwritable_report_path(tmp_path, small_report):
    with pytest.raises(OSError):
        bench.write_report(small_report, tmp_path / "missing" / "r.json")


def test_oversubscription_rejected(model42):
    with pytest.raises(ConfigError):
        bench.speedup_curve(small_frames(1), [1, 8], ["serial"], model42, SMALL, host=4)
    with pytest.raises(ConfigError):
        bench.speedup_curve([], [1], ["serial"], model42, SMALL)
    with pytest.raises(ConfigError):
        bench.speedup_curve(small_frames(1), [0], ["serial"], model42, SMALL)


# -- executor curves ---------------------------------------------------------

def _burn_busy(kind, slots, seconds=0.25, rounds=3):
    with make_executor(kind, slots) as ex:
        run_tasks(ex, [TaskSpec(f"warm{i}", tasks.square, (i,)) for i in range(ex.workers)])
        specs = [TaskSpec(f"b{i}", tasks.burn, (seconds,)) for i in range(rounds * ex.workers)]
        _, failures, stats = run_tasks(ex, specs, interval=0.01)
    assert not failures
    return bench.cpu_usage_profile(stats)


def test_busy_cores_on_eight_slots():
    # busy counts workers holding a task, so eight slots can be modelled on any host
    assert _burn_busy("master_slave", 8) <= 6.0
    assert _burn_busy("worker_per_core", 8) >= 7.0


@pytest.fixture(scope="module")
def serial_rows(model42):
    # alternate core counts so slow drift on a shared host hits both equally
    frames = corpus.generate_corpus(7, 5, 640, 360)
    rows = {1: [], 2: []}
    for _ in range(9):
        for c in (1, 2):
            rows[c].append(bench.measure("serial", c, frames, model42, PipelineConfig(), interval=0.01))
    return rows


def test_serial_et_independent_of_cores(serial_rows):
    # median of back-to-back ratios; single runs on a shared host jitter by about 10%
    ratio = np.median([b.avg_et_s / a.avg_et_s for a, b in zip(serial_rows[1], serial_rows[2])])
    assert all(r.workers == 1 for rows in serial_rows.values() for r in rows)
    assert ratio == pytest.approx(1.0, abs=0.10)


def test_serial_busy_is_one(serial_rows):
    for rows in serial_rows.values():
        for row in rows:
            assert row.total_s > 0.2
            assert row.busy_avg == pytest.approx(1.0, abs=0.1)


def _needs_slots(n):
    if host_slots() < n:
        pytest.skip(f"needs >= {n} slots, host has {host_slots()}")


def test_worker_per_core_et_decreases_with_cores():
    _needs_slots(4)
    ets = []
    for cores in (1, 2, 4):
        with make_executor("worker_per_core", cores) as ex:
            run_tasks(ex, [TaskSpec(f"w{i}", tasks.square, (i,)) for i in range(cores)])
            _, _, stats = run_tasks(ex, [TaskSpec(f"t{i}", tasks.cpu_work, (1_000_000,)) for i in range(16)])
        ets.append(stats.total_s / 16)
    assert ets[0] > ets[1] > ets[2]


def test_worker_per_core_beats_master_slave_at_four(model42):
    _needs_slots(4)
    frames = small_frames(16, size=(320, 240))
    ms = bench.measure("master_slave", 4, frames, model42, SMALL)
    wpc = bench.measure("worker_per_core", 4, frames, model42, SMALL)
    assert wpc.avg_et_s < ms.avg_et_s
