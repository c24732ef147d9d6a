"""Task executors: serial, master-slave and worker-per-core.

All three share the same contract: :meth:`Executor.submit` enqueues a
:class:`TaskSpec` and immediately returns an :class:`ObjectRef`;
:meth:`Executor.get` blocks until the task (including retries) finishes
and returns the value from the executor's :class:`ObjectStore`.

The two parallel executors run compute in worker *processes*, one task
per worker at a time. A scheduler thread in the driver dispatches tasks
over pipes and watches each worker's process sentinel; when a worker
dies mid-task the task is re-queued (up to ``max_retries`` times) and the
worker is respawned.

* ``worker_per_core``: one worker per slot; the driver itself does the
  (negligible) submission and dispatch work.
* ``master_slave``: two slots are reserved for a controller thread that
  validates and serialises tasks and a router thread that dispatches
  them and relays results; ``slots - 2`` (at least 1) compute workers.
* ``serial``: one in-process worker thread.
"""

from __future__ import annotations

import collections
import enum
import logging
import multiprocessing as mp
import os
import pickle
import queue
import signal
import threading
import time
import traceback
import zlib
from dataclasses import dataclass, field
from multiprocessing import connection as mp_connection
from typing import Any, Callable, Dict, Optional, Tuple

from ..errors import ConfigError, ShutdownError, TaskFailedError, UnknownRef
from .store import ObjectRef, ObjectStore

logger = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 3
_PRELOAD = ["capx.pipeline", "capx.engine.executors", "capx.engine.batch"]
# one BLAS thread per worker process; each worker owns one slot
_THREAD_ENV = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class ExecutorKind(str, enum.Enum):
    SERIAL = "serial"
    MASTER_SLAVE = "master_slave"
    WORKER_PER_CORE = "worker_per_core"

    @classmethod
    def parse(cls, value) -> "ExecutorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown executor {value!r} (expected one of {names})") from None


def host_slots() -> int:
    """Logical processors reported by the host."""
    return os.cpu_count() or 1


def compute_workers(kind, slots: int) -> int:
    kind = ExecutorKind.parse(kind)
    if slots < 1:
        raise ConfigError(f"slot count must be >= 1, got {slots}")
    if kind is ExecutorKind.SERIAL:
        return 1
    if kind is ExecutorKind.MASTER_SLAVE:
        return max(slots - 2, 1)
    return slots


@dataclass(frozen=True)
class FaultPolicy:
    """Deterministically fail a fraction of tasks (test builds only).

    A task is selected when the CRC32 of its id, scaled to [0, 1), falls
    below ``kill_fraction``. With ``once`` only the first attempt fails;
    otherwise every attempt does.
    """

    kill_fraction: float
    once: bool = True

    def __post_init__(self):
        if not 0.0 <= self.kill_fraction <= 1.0:
            raise ConfigError("kill_fraction must be in [0, 1]")

    def selects(self, task_id: str) -> bool:
        if self.kill_fraction >= 1.0:
            return True
        return zlib.crc32(str(task_id).encode()) / 2.0 ** 32 < self.kill_fraction

    def hits(self, task_id: str, attempt: int) -> bool:
        if not self.selects(task_id):
            return False
        return attempt == 1 or not self.once


@dataclass
class TaskSpec:
    task_id: str
    fn: Callable
    args: Tuple = ()
    frame_id: Optional[str] = None
    attempt: int = 0


@dataclass(eq=False)
class _Record:
    spec: TaskSpec
    ref: ObjectRef
    attempts: int = 0
    done: threading.Event = field(default_factory=threading.Event)
    error: Optional[BaseException] = None
    finished_at: Optional[float] = None
    blob: Optional[bytes] = None
    reasons: list = field(default_factory=list)


class Executor:
    kind: ExecutorKind

    def __init__(self, slots: Optional[int] = None, max_retries: int = DEFAULT_MAX_RETRIES,
                 initializer: Optional[Callable] = None, initargs: Tuple = ()):
        if max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        self.slots = slots if slots is not None else host_slots()
        self.workers = compute_workers(self.kind, self.slots)
        self.max_retries = max_retries
        self.store = ObjectStore()
        self._initializer = initializer
        self._initargs = initargs
        self._records: Dict[str, _Record] = {}
        self._lock = threading.Lock()
        self._closed = False
        self._fault: Optional[FaultPolicy] = None
        self._start()

    # -- public API ---------------------------------------------------------

    def submit(self, task: TaskSpec) -> ObjectRef:
        if self._closed:
            raise ShutdownError(f"{self.kind.value} executor is shut down")
        oid = self.store.new_id()
        rec = _Record(task, ObjectRef(oid))
        with self._lock:
            self._records[oid] = rec
        self._enqueue(rec)
        return rec.ref

    def get(self, ref: ObjectRef, timeout: Optional[float] = None) -> Any:
        rec = self._record(ref)
        if not rec.done.wait(timeout):
            raise TimeoutError(f"task {rec.spec.task_id!r} not finished within {timeout}s")
        if rec.error is not None:
            raise rec.error
        return self.store.get(ref)

    def attempts(self, ref: ObjectRef) -> int:
        """Number of times the task behind ``ref`` has been started."""
        return self._record(ref).attempts

    def finished_at(self, ref: ObjectRef) -> Optional[float]:
        return self._record(ref).finished_at

    def inject_fault(self, policy: Optional[FaultPolicy]) -> None:
        self._fault = policy

    def busy(self) -> int:
        """Compute workers currently holding a task."""
        raise NotImplementedError

    def shutdown(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._stop()
        with self._lock:
            pending = [r for r in self._records.values() if not r.done.is_set()]
        for rec in pending:
            self._finish(rec, error=ShutdownError(f"executor shut down before task {rec.spec.task_id!r} ran"))

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def __repr__(self):
        return f"<{type(self).__name__} slots={self.slots} workers={self.workers}>"

    # -- shared machinery ---------------------------------------------------

    def _record(self, ref: ObjectRef) -> _Record:
        with self._lock:
            rec = self._records.get(ref.id)
        if rec is None:
            raise UnknownRef(ref.id)
        return rec

    def _should_crash(self, rec: _Record) -> bool:
        policy = self._fault
        return policy is not None and policy.hits(rec.spec.task_id, rec.attempts)

    def _finish(self, rec: _Record, value: Any = None, size: Optional[int] = None,
                error: Optional[BaseException] = None) -> None:
        if rec.done.is_set():
            return  # exactly-once visibility
        if error is None:
            self.store.put(value, size=size, oid=rec.ref.id)
        rec.error = error
        rec.finished_at = time.perf_counter()
        rec.done.set()

    def _failed_attempt(self, rec: _Record, reason: str) -> bool:
        """Record a failed attempt; True if the task should be retried."""
        rec.reasons.append(reason)
        if rec.attempts < self.max_retries + 1 and not self._closed:
            logger.info("retrying task %s after attempt %d: %s", rec.spec.task_id, rec.attempts, reason)
            return True
        self._finish(rec, error=TaskFailedError(rec.spec.task_id, rec.attempts, reason))
        return False

    def _start(self):
        raise NotImplementedError

    def _stop(self):
        raise NotImplementedError

    def _enqueue(self, rec: _Record):
        raise NotImplementedError


class WorkerLost(RuntimeError):
    """Simulated loss of the in-process worker (serial executor only)."""


class SerialExecutor(Executor):
    kind = ExecutorKind.SERIAL

    def _start(self):
        if self._initializer is not None:
            self._initializer(*self._initargs)
        self._queue: "queue.Queue[Optional[_Record]]" = queue.Queue()
        self._current: Optional[_Record] = None
        self._thread = threading.Thread(target=self._run, name="serial-worker", daemon=True)
        self._thread.start()

    def _enqueue(self, rec):
        self._queue.put(rec)

    def busy(self) -> int:
        return 0 if self._current is None else 1

    def _run(self):
        while True:
            rec = self._queue.get()
            if rec is None:
                return
            if rec.done.is_set():
                continue
            rec.attempts += 1
            self._current = rec
            try:
                if self._should_crash(rec):
                    raise WorkerLost("injected worker loss")
                value = rec.spec.fn(*rec.spec.args)
            except Exception as exc:
                retry = self._failed_attempt(rec, f"{type(exc).__name__}: {exc}")
                if retry:
                    self._queue.put(rec)
            else:
                self._finish(rec, value)
            finally:
                self._current = None

    def _stop(self):
        self._queue.put(None)
        self._thread.join(timeout=30)


def _worker_main(conn, initializer, initargs):
    signal.signal(signal.SIGINT, signal.SIG_IGN)
    try:
        if initializer is not None:
            initializer(*initargs)
    except BaseException:
        conn.send(("init_error", None, traceback.format_exc()))
        return
    while True:
        try:
            msg = conn.recv()
        except (EOFError, OSError):
            return
        if msg is None:
            return
        oid, crash, blob = msg
        if crash:
            os._exit(70)
        try:
            fn, args = pickle.loads(blob)
            payload = pickle.dumps(fn(*args), protocol=pickle.HIGHEST_PROTOCOL)
        except Exception:
            conn.send(("err", oid, traceback.format_exc(limit=8)))
        else:
            conn.send(("ok", oid, payload))


_ctx_lock = threading.Lock()
_ctx = None


def _mp_context():
    global _ctx
    with _ctx_lock:
        if _ctx is None:
            for name in _THREAD_ENV:
                os.environ.setdefault(name, "1")
            method = "forkserver" if "forkserver" in mp.get_all_start_methods() else "spawn"
            _ctx = mp.get_context(method)
            if method == "forkserver":
                _ctx.set_forkserver_preload(_PRELOAD)
        return _ctx


@dataclass(eq=False)
class _Worker:
    index: int
    proc: Any
    conn: Any
    task: Optional[_Record] = None


class ProcessExecutor(Executor):
    """Worker-per-core: one compute process per slot, dispatched by the driver."""

    kind = ExecutorKind.WORKER_PER_CORE
    _scheduler_name = "scheduler"
    _max_init_failures = 3

    def _start(self):
        self._mp = _mp_context()
        self._pending: "collections.deque[_Record]" = collections.deque()
        self._pending_lock = threading.Lock()
        self._stopping = False
        self._broken: Optional[str] = None
        self._init_failures = 0
        self._wake_r, self._wake_w = os.pipe()
        os.set_blocking(self._wake_r, False)
        self._pool = [self._spawn(i) for i in range(self.workers)]
        self._scheduler = threading.Thread(target=self._schedule_loop,
                                           name=self._scheduler_name, daemon=True)
        self._scheduler.start()

    def _spawn(self, index: int) -> _Worker:
        parent, child = self._mp.Pipe(duplex=True)
        proc = self._mp.Process(target=_worker_main, args=(child, self._initializer, self._initargs),
                                name=f"capx-worker-{index}", daemon=True)
        proc.start()
        child.close()
        return _Worker(index, proc, parent)

    def busy(self) -> int:
        return sum(1 for w in self._pool if w.task is not None)

    def _wake(self):
        try:
            os.write(self._wake_w, b"x")
        except OSError:
            pass

    def _enqueue(self, rec):
        rec.blob = pickle.dumps((rec.spec.fn, rec.spec.args), protocol=pickle.HIGHEST_PROTOCOL)
        self._push(rec)

    def _push(self, rec, front=False):
        with self._pending_lock:
            if front:
                self._pending.appendleft(rec)
            else:
                self._pending.append(rec)
        self._wake()

    def _dispatch(self):
        for w in self._pool:
            if w.task is not None:
                continue
            with self._pending_lock:
                if not self._pending:
                    return
                rec = self._pending.popleft()
            if rec.done.is_set():
                continue
            if self._broken:
                self._finish(rec, error=TaskFailedError(rec.spec.task_id, rec.attempts, self._broken))
                continue
            rec.attempts += 1
            w.task = rec
            try:
                w.conn.send((rec.ref.id, self._should_crash(rec), rec.blob))
            except (OSError, ValueError):
                # worker already gone; its sentinel will fire
                pass

    def _schedule_loop(self):
        try:
            while not self._stopping:
                self._dispatch()
                live = [w for w in self._pool if not w.conn.closed]
                conns = {w.conn: w for w in live}
                sentinels = {w.proc.sentinel: w for w in live}
                ready = mp_connection.wait(list(conns) + list(sentinels) + [self._wake_r], timeout=0.5)
                for obj in ready:
                    if obj == self._wake_r:
                        try:
                            while os.read(self._wake_r, 4096):
                                pass
                        except BlockingIOError:
                            pass
                    elif obj in conns:
                        self._drain(conns[obj])
                    elif obj in sentinels:
                        self._reap(sentinels[obj])
        except Exception:
            logger.exception("%s thread crashed", self._scheduler_name)
            self._broken = "scheduler crashed"
            raise

    def _drain(self, w: _Worker):
        if self._pool[w.index] is not w:
            return
        try:
            while w.conn.poll():
                self._handle(w, w.conn.recv())
        except (EOFError, OSError):
            self._reap(w)

    def _handle(self, w: _Worker, msg):
        status, oid, body = msg
        if status == "init_error":
            self._init_failures += 1
            logger.error("worker %d failed to initialise:\n%s", w.index, body)
            if self._init_failures >= self._max_init_failures:
                self._broken = f"worker initialisation failed:\n{body}"
                with self._pending_lock:
                    stranded = list(self._pending)
                    self._pending.clear()
                for rec in stranded:
                    self._finish(rec, error=TaskFailedError(rec.spec.task_id, rec.attempts, self._broken))
            return
        rec = w.task
        w.task = None
        if rec is None or rec.ref.id != oid:
            return
        self._init_failures = 0
        if status == "ok":
            self._finish(rec, pickle.loads(body), size=len(body))
        elif self._failed_attempt(rec, body.strip().splitlines()[-1] if body else "task error"):
            self._push(rec, front=True)

    def _reap(self, w: _Worker):
        if self._pool[w.index] is not w:
            return
        try:
            while w.conn.poll():
                self._handle(w, w.conn.recv())
        except (EOFError, OSError):
            pass
        w.proc.join(timeout=5)
        code = w.proc.exitcode
        try:
            w.conn.close()
        except OSError:
            pass
        rec, w.task = w.task, None
        if self._stopping:
            return
        if not self._broken:
            self._pool[w.index] = self._spawn(w.index)
        if rec is not None and not rec.done.is_set():
            if self._failed_attempt(rec, f"worker process exited unexpectedly (code {code})"):
                self._push(rec, front=True)

    def _stop(self):
        self._stopping = True
        self._wake()
        self._scheduler.join(timeout=30)
        for w in self._pool:
            try:
                w.conn.send(None)
            except (OSError, ValueError):
                pass
        deadline = time.monotonic() + 5
        for w in self._pool:
            w.proc.join(timeout=max(deadline - time.monotonic(), 0.1))
            if w.proc.is_alive():
                w.proc.terminate()
                w.proc.join(timeout=5)
            try:
                w.conn.close()
            except OSError:
                pass
        for fd in (self._wake_r, self._wake_w):
            try:
                os.close(fd)
            except OSError:
                pass


WorkerPerCoreExecutor = ProcessExecutor


class MasterSlaveExecutor(ProcessExecutor):
    """Baseline: controller + router threads occupy two of the slots."""

    kind = ExecutorKind.MASTER_SLAVE
    _scheduler_name = "router"

    def _start(self):
        self._inbox: "queue.Queue[Optional[_Record]]" = queue.Queue()
        super()._start()
        self._controller = threading.Thread(target=self._control_loop, name="controller", daemon=True)
        self._controller.start()

    def _enqueue(self, rec):
        self._inbox.put(rec)

    def _control_loop(self):
        while True:
            rec = self._inbox.get()
            if rec is None:
                return
            spec = rec.spec
            if not callable(spec.fn):
                self._finish(rec, error=TaskFailedError(spec.task_id, 0, "task function is not callable"))
                continue
            try:
                rec.blob = pickle.dumps((spec.fn, spec.args), protocol=pickle.HIGHEST_PROTOCOL)
            except Exception as exc:
                self._finish(rec, error=TaskFailedError(spec.task_id, 0, f"cannot serialise task: {exc}"))
                continue
            self._push(rec)

    def _stop(self):
        self._inbox.put(None)
        self._controller.join(timeout=30)
        super()._stop()


_EXECUTORS = {
    ExecutorKind.SERIAL: SerialExecutor,
    ExecutorKind.MASTER_SLAVE: MasterSlaveExecutor,
    ExecutorKind.WORKER_PER_CORE: ProcessExecutor,
}


def make_executor(kind, slots: Optional[int] = None, max_retries: int = DEFAULT_MAX_RETRIES,
                  initializer: Optional[Callable] = None, initargs: Tuple = ()) -> Executor:
    return _EXECUTORS[ExecutorKind.parse(kind)](slots, max_retries, initializer, initargs)


def submit(executor: Executor, task: TaskSpec) -> ObjectRef:
    return executor.submit(task)


def get(executor: Executor, ref: ObjectRef, timeout: Optional[float] = None) -> Any:
    return executor.get(ref, timeout)


def inject_fault(executor: Executor, policy: Optional[FaultPolicy]) -> None:
    executor.inject_fault(policy)
