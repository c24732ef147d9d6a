"""Batch execution of frames on an executor, with busy-worker sampling."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..cnn.model import CnnModel
from ..core import DensityResult, Frame
from ..errors import BatchError, ConfigError, TaskFailedError
from ..pipeline import PipelineConfig, analyze_frame
from .executors import (DEFAULT_MAX_RETRIES, Executor, ExecutorKind, FaultPolicy,
                        TaskSpec, make_executor)

SAMPLE_INTERVAL = 0.05  # seconds

_shared: Dict[str, Any] = {}


def install_shared(model: CnnModel, config: PipelineConfig) -> None:
    """Worker initializer: keep one model and config per worker process."""
    _shared["model"] = model
    _shared["config"] = config


def analyze_shared(frame: Frame) -> DensityResult:
    return analyze_frame(frame, _shared["model"], _shared["config"])


@dataclass
class BatchStats:
    executor: str
    workers: int
    per_frame_s: List[float]
    total_s: float
    busy_samples: List[Tuple[float, int]]
    # seconds from batch start to each task's completion, in completion order
    completion_s: List[float] = field(default_factory=list, repr=False)
    # attempts used per task, in task order
    attempts: List[int] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "executor": self.executor,
            "workers": self.workers,
            "per_frame_s": list(self.per_frame_s),
            "total_s": self.total_s,
            "busy_samples": [{"t_ms": t, "busy": b} for t, b in self.busy_samples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BatchStats":
        return cls(
            executor=d["executor"],
            workers=int(d["workers"]),
            per_frame_s=[float(v) for v in d["per_frame_s"]],
            total_s=float(d["total_s"]),
            busy_samples=[(float(s["t_ms"]), int(s["busy"])) for s in d["busy_samples"]],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class BusySampler:
    """Record ``(t_ms, busy workers)`` every ``interval`` seconds."""

    def __init__(self, executor: Executor, interval: float = SAMPLE_INTERVAL):
        self.executor = executor
        self.interval = interval
        self.samples: List[Tuple[float, int]] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="busy-sampler", daemon=True)

    def start(self, t0: float) -> "BusySampler":
        self._t0 = t0
        self._thread.start()
        return self

    def _run(self):
        while not self._stop.wait(self.interval):
            self.samples.append(((time.perf_counter() - self._t0) * 1000.0, self.executor.busy()))

    def stop(self) -> List[Tuple[float, int]]:
        self._stop.set()
        self._thread.join()
        if not self.samples:
            self.samples.append(((time.perf_counter() - self._t0) * 1000.0, self.executor.busy()))
        return self.samples


def run_tasks(executor: Executor, tasks: Sequence[TaskSpec],
              interval: float = SAMPLE_INTERVAL):
    """Submit ``tasks`` and wait for all of them.

    Returns ``(values, failures, stats)`` where ``values`` follows task
    order (``None`` for failures) and ``failures`` maps task id to the
    error message. ``stats.per_frame_s`` is empty; callers fill it in.
    """
    if not tasks:
        raise ConfigError("need at least one task")
    t0 = time.perf_counter()
    sampler = BusySampler(executor, interval).start(t0)
    refs = [executor.submit(t) for t in tasks]
    values: List[Any] = []
    failures: Dict[str, str] = {}
    try:
        for task, ref in zip(tasks, refs):
            try:
                values.append(executor.get(ref))
            except TaskFailedError as exc:
                values.append(None)
                failures[task.task_id] = str(exc)
    finally:
        total = time.perf_counter() - t0
        samples = sampler.stop()
    done = sorted(executor.finished_at(r) - t0 for r in refs if executor.finished_at(r) is not None)
    stats = BatchStats(executor.kind.value, executor.workers, [], total,
                       [(t, b) for t, b in samples if t <= total * 1000.0] or samples[:1], done,
                       [executor.attempts(r) for r in refs])
    return values, failures, stats


def frame_tasks(frames: Sequence[Frame]) -> List[TaskSpec]:
    return [TaskSpec(f.id, analyze_shared, (f,), frame_id=f.id) for f in frames]


def execute_frames(executor: Executor, frames: Sequence[Frame],
                   interval: float = SAMPLE_INTERVAL):
    """Run frames on an executor whose workers already hold the model."""
    ordered = sorted(frames, key=lambda f: f.id)
    values, failures, stats = run_tasks(executor, frame_tasks(ordered), interval)
    results = [v for v in values if v is not None]
    stats.per_frame_s = [r.elapsed for r in results]
    if failures:
        raise BatchError(failures, results, stats)
    return results, stats


def run_batch(executor_kind, frames: Sequence[Frame], model: CnnModel,
              config: PipelineConfig = PipelineConfig(), slots: Optional[int] = None,
              max_retries: int = DEFAULT_MAX_RETRIES, fault: Optional[FaultPolicy] = None,
              interval: float = SAMPLE_INTERVAL):
    """Analyse ``frames`` on a fresh executor of the given kind.

    Results are ordered by frame id. Raises :class:`BatchError` (carrying
    the successful results) if any frame exhausts its retries.
    """
    if not frames:
        raise ConfigError("run_batch needs at least one frame")
    kind = ExecutorKind.parse(executor_kind)
    with make_executor(kind, slots, max_retries, install_shared, (model, config)) as ex:
        if fault is not None:
            ex.inject_fault(fault)
        return execute_frames(ex, frames, interval)
