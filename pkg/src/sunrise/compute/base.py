"""Back-end-agnostic compute job contract and shared queueing machinery.

A ComputeJob describes one build or run execution: which files to stage into
the job workspace, the command to execute, and which paths to fetch out
afterwards. Back-ends run jobs in isolated per-job sandboxes, bounded by
``max_concurrent_jobs`` with FIFO queueing above the limit.
"""
from __future__ import annotations

import itertools
import os
import queue
import threading
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from ..errors import (
    NoBackendAvailableError,
    StageInFailure,
    SunriseError,
    UnknownJobError,
)


class JobState(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    EXITED = "exited"
    TIMED_OUT = "timed_out"
    BACKEND_FAILED = "backend_failed"


_TERMINAL = frozenset({JobState.EXITED, JobState.TIMED_OUT, JobState.BACKEND_FAILED})


@dataclass(frozen=True)
class JobStatus:
    state: JobState
    exit_code: int | None = None
    reason: str | None = None

    @property
    def is_terminal(self) -> bool:
        return self.state in _TERMINAL

    @property
    def succeeded(self) -> bool:
        return self.state is JobState.EXITED and self.exit_code == 0

    @staticmethod
    def queued() -> "JobStatus":
        return JobStatus(JobState.QUEUED)

    @staticmethod
    def running() -> "JobStatus":
        return JobStatus(JobState.RUNNING)

    @staticmethod
    def exited(code: int) -> "JobStatus":
        return JobStatus(JobState.EXITED, exit_code=code)

    @staticmethod
    def timed_out() -> "JobStatus":
        return JobStatus(JobState.TIMED_OUT)

    @staticmethod
    def backend_failed(reason: str) -> "JobStatus":
        return JobStatus(JobState.BACKEND_FAILED, reason=reason)

    def describe(self) -> str:
        if self.state is JobState.EXITED:
            return f"exited with code {self.exit_code}"
        if self.state is JobState.TIMED_OUT:
            return "timed out"
        if self.state is JobState.BACKEND_FAILED:
            return f"backend failure: {self.reason}"
        return self.state.value


def _relative_path_ok(path: str) -> bool:
    if not path or path.startswith(("/", "\\")):
        return False
    return ".." not in path.replace("\\", "/").split("/")


@dataclass(frozen=True)
class ComputeJob:
    """One build or run execution, independent of the back-end running it."""

    experiment_id: str
    phase: str
    image_ref: str
    command: str
    stage_in: tuple[tuple[str, str], ...] = ()
    fetch_out: tuple[str, ...] = ()
    timeout_s: float | None = None

    def __post_init__(self):
        if not self.command:
            raise ValueError("job command must be non-empty")
        for _, dest in self.stage_in:
            if not _relative_path_ok(dest):
                raise ValueError(f"stage_in destination {dest!r} must be relative and traversal-free")
        for path in self.fetch_out:
            if not _relative_path_ok(path):
                raise ValueError(f"fetch_out path {path!r} must be relative and traversal-free")


@dataclass(frozen=True)
class JobHandle:
    job_id: str
    backend: str


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    kind: str
    max_concurrent_jobs: int
    active_jobs: int = 0
    endpoint: str | None = None


def select_backend(registry: Sequence[BackendDescriptor], job: ComputeJob) -> BackendDescriptor:
    """Least-loaded back-end; ties broken by lexicographically smallest name."""
    if not registry:
        raise NoBackendAvailableError("no compute back-end registered")
    return min(registry, key=lambda d: (d.active_jobs, d.name))


class ComputeBackend(ABC):
    name: str
    kind: str

    @abstractmethod
    def submit(self, job: ComputeJob) -> JobHandle: ...

    @abstractmethod
    def poll(self, handle: JobHandle) -> JobStatus: ...

    @abstractmethod
    def fetch_artifact(self, handle: JobHandle, path: str) -> bytes: ...

    @abstractmethod
    def fetch_log(self, handle: JobHandle) -> str: ...

    @abstractmethod
    def cancel(self, handle: JobHandle) -> JobStatus: ...

    @abstractmethod
    def active_jobs(self) -> int: ...

    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            name=self.name,
            kind=self.kind,
            max_concurrent_jobs=getattr(self, "max_concurrent_jobs", 1),
            active_jobs=self.active_jobs(),
            endpoint=getattr(self, "endpoint", None),
        )


@dataclass
class JobEntry:
    job: ComputeJob
    job_id: str
    status: JobStatus = field(default_factory=JobStatus.queued)
    cancelled: bool = False
    # back-end specific slots
    extra: dict = field(default_factory=dict)


class QueuedBackend(ComputeBackend):
    """Shared bookkeeping: FIFO queue, worker pool, monotone status updates.

    Subclasses implement ``_execute`` (stage in, run the command, set the
    terminal status) and ``_kill`` (best-effort termination for cancel).
    """

    def __init__(self, name: str, kind: str, max_concurrent_jobs: int):
        if max_concurrent_jobs < 1:
            raise ValueError("max_concurrent_jobs must be positive")
        self.name = name
        self.kind = kind
        self.max_concurrent_jobs = max_concurrent_jobs
        self._entries: dict[str, JobEntry] = {}
        self._lock = threading.RLock()
        self._queue: queue.Queue[JobEntry | None] = queue.Queue()
        self._seq = itertools.count(1)
        self._workers = [
            threading.Thread(target=self._worker_loop, name=f"{name}-worker-{i}", daemon=True)
            for i in range(max_concurrent_jobs)
        ]
        for w in self._workers:
            w.start()

    # -- hooks ---------------------------------------------------------------

    @abstractmethod
    def _execute(self, entry: JobEntry) -> None:
        """Run the job to a terminal status (must call _set_status)."""

    @abstractmethod
    def _kill(self, entry: JobEntry) -> None:
        """Best-effort termination of a running job."""

    def _check_reachable(self, job: ComputeJob) -> None:
        """Raise BackendUnreachableError when the substrate cannot be reached."""

    # -- public API ------------------------------------------------------------

    def submit(self, job: ComputeJob) -> JobHandle:
        self._check_reachable(job)
        for source, dest in job.stage_in:
            if not os.path.isfile(source):
                raise StageInFailure(dest, f"source {source!r} does not exist")
        job_id = f"{next(self._seq):06d}-{uuid.uuid4().hex[:8]}"
        entry = JobEntry(job=job, job_id=job_id)
        with self._lock:
            self._entries[job_id] = entry
        self._queue.put(entry)
        return JobHandle(job_id=job_id, backend=self.name)

    def poll(self, handle: JobHandle) -> JobStatus:
        return self._entry(handle).status

    def cancel(self, handle: JobHandle) -> JobStatus:
        entry = self._entry(handle)
        with self._lock:
            if entry.status.is_terminal:
                return entry.status
            entry.cancelled = True
        self._kill(entry)
        self._set_status(entry, JobStatus.backend_failed("cancelled"))
        return entry.status

    def active_jobs(self) -> int:
        with self._lock:
            return sum(1 for e in self._entries.values() if not e.status.is_terminal)

    def close(self) -> None:
        """Cancel in-flight jobs and stop the worker pool."""
        with self._lock:
            entries = list(self._entries.values())
        for entry in entries:
            if not entry.status.is_terminal:
                self.cancel(JobHandle(entry.job_id, self.name))
        for _ in self._workers:
            self._queue.put(None)
        for w in self._workers:
            w.join(timeout=5)

    # -- internals ---------------------------------------------------------------

    def _entry(self, handle: JobHandle) -> JobEntry:
        with self._lock:
            entry = self._entries.get(handle.job_id)
        if entry is None or handle.backend != self.name:
            raise UnknownJobError(f"unknown job handle: {handle!r}")
        return entry

    def _set_status(self, entry: JobEntry, status: JobStatus) -> bool:
        """Monotone update; terminal statuses are never overwritten."""
        with self._lock:
            if entry.status.is_terminal:
                return False
            entry.status = status
            return True

    def _worker_loop(self) -> None:
        while True:
            entry = self._queue.get()
            if entry is None:
                return
            with self._lock:
                if entry.status.is_terminal:  # cancelled while queued
                    continue
            try:
                self._execute(entry)
            except SunriseError as exc:
                self._set_status(entry, JobStatus.backend_failed(exc.message))
            except Exception as exc:  # noqa: BLE001 - a job must always reach a terminal status
                self._set_status(entry, JobStatus.backend_failed(f"{type(exc).__name__}: {exc}"))
