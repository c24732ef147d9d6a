"""Execution-time, speedup and CPU-usage benchmarks across executors."""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .cnn.model import CnnModel
from .core import Frame
from .engine.batch import BatchStats, SAMPLE_INTERVAL, execute_frames, install_shared
from .engine.executors import ExecutorKind, host_slots, make_executor
from .errors import ConfigError, DomainError
from .pipeline import PipelineConfig, analyze_frame

REALTIME_LIMIT_S = 1.0
REALTIME_MIN_SLOTS = 4
CSV_COLUMNS = ("executor", "cores", "frames", "avg_et_s", "total_s", "busy_avg")


def percent_faster(slower_et: float, faster_et: float) -> float:
    """``100 * (slower - faster) / slower``; negative if ``faster_et`` is slower."""
    if not slower_et > 0:
        raise DomainError(f"slower execution time must be positive, got {slower_et}")
    return 100.0 * (slower_et - faster_et) / slower_et


def cpu_usage_profile(stats: BatchStats) -> float:
    """Time-weighted mean of busy workers over the batch's active interval.

    Each sample stands for the span since the previous sample (or the
    batch start); the last one also covers the tail up to ``total_s``.
    """
    samples = sorted(stats.busy_samples)
    if not samples:
        raise ValueError("no busy samples recorded")
    end_ms = max(stats.total_s * 1000.0, samples[-1][0])
    weighted = 0.0
    span = 0.0
    prev = 0.0
    for i, (t, busy) in enumerate(samples):
        stop = end_ms if i == len(samples) - 1 else t
        dt = max(stop - prev, 0.0)
        weighted += busy * dt
        span += dt
        prev = t
    if span == 0.0:
        return float(samples[-1][1])
    return weighted / span


@dataclass
class BenchRow:
    executor: str
    cores: int
    frames: int
    avg_et_s: float
    total_s: float
    busy_avg: float
    workers: int = 0
    # time between successive frame completions; averages to avg_et_s
    per_frame_s: List[float] = field(default_factory=list)
    latency_s: Dict[str, float] = field(default_factory=dict)

    def csv_row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


@dataclass
class BenchReport:
    host: Dict[str, object]
    frames: int
    rows: List[BenchRow]
    faster: List[Dict[str, object]] = field(default_factory=list)
    realtime: Dict[str, object] = field(default_factory=dict)
    config: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("a report needs at least one frame")

    def row(self, executor, cores: Optional[int] = None) -> BenchRow:
        name = ExecutorKind.parse(executor).value
        for r in self.rows:
            if r.executor == name and (cores is None or r.cores == cores):
                return r
        raise KeyError((name, cores))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        d = dict(d)
        d["rows"] = [BenchRow(**r) for r in d["rows"]]
        return cls(**d)


def describe_host(slots: Optional[int] = None) -> dict:
    return {
        "slots": slots if slots is not None else host_slots(),
        "slot_definition": "logical processors reported by os.cpu_count()",
        "detected_slots": host_slots(),
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
    }


def _completion_intervals(stats: BatchStats) -> List[float]:
    out, prev = [], 0.0
    for t in stats.completion_s:
        out.append(t - prev)
        prev = t
    return out


def _row(kind: ExecutorKind, cores: int, stats: BatchStats) -> BenchRow:
    n = len(stats.per_frame_s)
    lat = stats.per_frame_s
    intervals = _completion_intervals(stats)
    return BenchRow(
        executor=kind.value,
        cores=cores,
        frames=n,
        avg_et_s=sum(intervals) / n,
        total_s=stats.total_s,
        busy_avg=cpu_usage_profile(stats),
        workers=stats.workers,
        per_frame_s=intervals,
        latency_s={"min": min(lat), "mean": sum(lat) / n, "max": max(lat)},
    )


def measure(kind, cores: int, frames: Sequence[Frame], model: CnnModel,
            config: PipelineConfig, warmup: bool = True,
            interval: float = SAMPLE_INTERVAL) -> BenchRow:
    """One executor at one core count; a discarded warm-up batch comes first."""
    kind = ExecutorKind.parse(kind)
    with make_executor(kind, cores, initializer=install_shared, initargs=(model, config)) as ex:
        if warmup:
            execute_frames(ex, list(frames)[: ex.workers], interval)
        _, stats = execute_frames(ex, frames, interval)
    return _row(kind, cores, stats)


def speedup_curve(frames: Sequence[Frame], core_counts: Sequence[int], executors: Sequence,
                  model: CnnModel, config: PipelineConfig = PipelineConfig(),
                  host: Optional[int] = None, warmup: bool = True,
                  interval: float = SAMPLE_INTERVAL) -> BenchReport:
    """Run every (executor, core count) pair sequentially and collect a report.

    The serial executor is core-independent and measured once (``cores=1``).
    ``host`` overrides the detected slot count used for the
    oversubscription check.
    """
    if not frames:
        raise ConfigError("benchmark needs at least one frame")
    slots = host if host is not None else host_slots()
    cores = sorted(set(int(c) for c in core_counts))
    if not cores or cores[0] < 1:
        raise ConfigError("core counts must be positive")
    if cores[-1] > slots:
        raise ConfigError(f"{cores[-1]} cores requested but host has {slots} slots")
    kinds = []
    for e in executors:
        k = ExecutorKind.parse(e)
        if k not in kinds:
            kinds.append(k)
    if not kinds:
        raise ConfigError("no executors selected")

    rows: List[BenchRow] = []
    for kind in kinds:
        counts = [1] if kind is ExecutorKind.SERIAL else cores
        for c in counts:
            rows.append(measure(kind, c, frames, model, config, warmup, interval))

    report = BenchReport(describe_host(slots), len(frames), rows,
                         config=config.to_dict())
    report.faster = faster_pairs(rows)

    install_shared(model, config)
    analyze_frame(frames[0], model, config)
    t0 = time.perf_counter()
    analyze_frame(frames[0], model, config)
    single = time.perf_counter() - t0
    report.realtime = realtime_flag(single, slots, frames[0])
    return report


def faster_pairs(rows: Sequence[BenchRow]) -> List[dict]:
    """%Faster of each parallel point over serial, and worker-per-core over master-slave."""
    serial = [r for r in rows if r.executor == ExecutorKind.SERIAL.value]
    by_key = {(r.executor, r.cores): r for r in rows}
    pairs = []
    for r in rows:
        if r.executor == ExecutorKind.SERIAL.value:
            continue
        if serial:
            pairs.append({"slower": serial[0].executor, "faster": r.executor, "cores": r.cores,
                          "percent": percent_faster(serial[0].avg_et_s, r.avg_et_s)})
        if r.executor == ExecutorKind.WORKER_PER_CORE.value:
            ms = by_key.get((ExecutorKind.MASTER_SLAVE.value, r.cores))
            if ms is not None:
                pairs.append({"slower": ms.executor, "faster": r.executor, "cores": r.cores,
                              "percent": percent_faster(ms.avg_et_s, r.avg_et_s)})
    return pairs


def realtime_flag(frame_s: float, slots: int, frame: Optional[Frame] = None) -> dict:
    """Whether one frame met the one-second budget, and whether the host qualifies."""
    return {
        "frame_s": frame_s,
        "limit_s": REALTIME_LIMIT_S,
        "ok": frame_s < REALTIME_LIMIT_S,
        "host_qualifies": slots >= REALTIME_MIN_SLOTS,
        "frame_size": None if frame is None else [frame.width, frame.height],
    }


def write_report(report: BenchReport, path, fmt: str = "json") -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for r in report.rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v
                                 for k, v in r.csv_row().items()})
    else:
        raise ConfigError(f"unknown report format {fmt!r}")


def read_report(path) -> BenchReport:
    return BenchReport.from_dict(json.loads(Path(path).read_text()))


def read_report_csv(path) -> List[dict]:
    with Path(path).open(newline="") as fh:
        return [
            {"executor": r["executor"], "cores": int(r["cores"]), "frames": int(r["frames"]),
             "avg_et_s": float(r["avg_et_s"]), "total_s": float(r["total_s"]),
             "busy_avg": float(r["busy_avg"])}
            for r in csv.DictReader(fh)
        ]
