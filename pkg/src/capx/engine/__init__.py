"""Execution layer: object store, scheduler with retries, three executors."""

from .batch import BatchStats, analyze_shared, execute_frames, install_shared, run_batch, run_tasks
from .executors import (
    Executor,
    ExecutorKind,
    FaultPolicy,
    MasterSlaveExecutor,
    ProcessExecutor,
    SerialExecutor,
    TaskSpec,
    WorkerPerCoreExecutor,
    compute_workers,
    get,
    host_slots,
    inject_fault,
    make_executor,
    submit,
)
from .store import INLINE_THRESHOLD, ObjectRef, ObjectStore, store_get, store_put

__all__ = [
    "BatchStats", "Executor", "ExecutorKind", "FaultPolicy", "INLINE_THRESHOLD",
    "MasterSlaveExecutor", "ObjectRef", "ObjectStore", "ProcessExecutor",
    "SerialExecutor", "TaskSpec", "WorkerPerCoreExecutor", "compute_workers",
    "analyze_shared", "execute_frames", "install_shared", "get", "host_slots", "inject_fault", "make_executor",
    "run_batch", "run_tasks", "store_get", "store_put", "submit",
]
