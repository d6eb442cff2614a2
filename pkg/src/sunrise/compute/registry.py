"""Back-end registry: construction from configuration and job dispatch."""
from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Sequence

from ..errors import NoBackendAvailableError, SchemaError
from .base import BackendDescriptor, ComputeBackend, ComputeJob, JobHandle, JobStatus, select_backend
from .engine import ContainerEngineBackend
from .local import LocalProcessBackend


class BackendRegistry:
    """Holds the configured back-ends and routes jobs to the least-loaded one.

    Submissions are serialized so the least-loaded selection is deterministic
    for a given submission order.
    """

    def __init__(self, backends: Sequence[ComputeBackend] = ()):
        self._backends: dict[str, ComputeBackend] = {}
        self._submit_lock = threading.Lock()
        for backend in backends:
            self.add(backend)

    def add(self, backend: ComputeBackend) -> None:
        if backend.name in self._backends:
            raise ValueError(f"duplicate back-end name {backend.name!r}")
        self._backends[backend.name] = backend

    def get(self, name: str) -> ComputeBackend:
        try:
            return self._backends[name]
        except KeyError:
            raise NoBackendAvailableError(f"no back-end named {name!r}") from None

    def backend_for(self, handle: JobHandle) -> ComputeBackend:
        return self.get(handle.backend)

    def descriptors(self) -> list[BackendDescriptor]:
        return [b.descriptor() for b in self._backends.values()]

    def submit(self, job: ComputeJob) -> JobHandle:
        with self._submit_lock:
            chosen = select_backend(self.descriptors(), job)
            return self.get(chosen.name).submit(job)

    def poll(self, handle: JobHandle) -> JobStatus:
        return self.backend_for(handle).poll(handle)

    def fetch_artifact(self, handle: JobHandle, path: str) -> bytes:
        return self.backend_for(handle).fetch_artifact(handle, path)

    def fetch_log(self, handle: JobHandle) -> str:
        return self.backend_for(handle).fetch_log(handle)

    def cancel(self, handle: JobHandle) -> JobStatus:
        return self.backend_for(handle).cancel(handle)

    def close(self) -> None:
        for backend in self._backends.values():
            close = getattr(backend, "close", None)
            if close is not None:
                close()


def build_backend(entry: dict[str, Any], default_work_dir: Path) -> ComputeBackend:
    kind = entry.get("kind")
    name = entry.get("name")
    if not name or not isinstance(name, str):
        raise SchemaError("back-end entry requires a non-empty 'name'")
    max_jobs = entry.get("max_concurrent_jobs", 4)
    if not isinstance(max_jobs, int) or max_jobs < 1:
        raise SchemaError(f"back-end {name!r}: 'max_concurrent_jobs' must be a positive integer")
    if kind == "local_process":
        work_dir = Path(entry.get("work_dir") or (default_work_dir / name))
        return LocalProcessBackend(name, work_dir, max_concurrent_jobs=max_jobs)
    if kind == "container_engine":
        endpoint = entry.get("endpoint")
        if not endpoint:
            raise SchemaError(f"back-end {name!r}: container_engine requires an 'endpoint'")
        return ContainerEngineBackend(
            name,
            endpoint,
            api_version=entry.get("api_version", "1.43"),
            max_concurrent_jobs=max_jobs,
            container_workdir=entry.get("container_workdir", "/workspace"),
        )
    raise SchemaError(f"back-end {name!r}: unknown kind {kind!r}")


def load_backends_file(path: str | Path, default_work_dir: Path) -> BackendRegistry:
    """Build a registry from a JSON list of back-end descriptors."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise SchemaError("backends file must contain a JSON list")
    return BackendRegistry([build_backend(entry, default_work_dir) for entry in raw])
