"""Local-process back-end: runs job commands via the platform shell.

Each job gets a fresh sandbox directory under the back-end work dir and a
scrubbed environment (PATH, HOME and SUNRISE_* only). The container image
reference is not used locally; it is recorded in the job log instead.
"""
from __future__ import annotations

import os
import shutil
import signal
import subprocess
import time
from pathlib import Path

from ..errors import ArtifactNotFoundError, JobNotTerminalError
from .base import JobEntry, JobHandle, JobStatus, QueuedBackend

# Extra wall-clock slack granted on top of a job timeout before the process
# group is killed.
TIMEOUT_GRACE_S = 0.25


def _scrubbed_env() -> dict[str, str]:
    env = {}
    for key in ("PATH", "HOME"):
        if key in os.environ:
            env[key] = os.environ[key]
    for key, value in os.environ.items():
        if key.startswith("SUNRISE_"):
            env[key] = value
    return env


class LocalProcessBackend(QueuedBackend):
    def __init__(self, name: str, work_dir: str | os.PathLike, max_concurrent_jobs: int = 4):
        super().__init__(name, "local_process", max_concurrent_jobs)
        self.work_dir = Path(work_dir)
        self.work_dir.mkdir(parents=True, exist_ok=True)

    def _sandbox(self, entry: JobEntry) -> Path:
        return self.work_dir / entry.job_id

    def _log_path(self, entry: JobEntry) -> Path:
        return self.work_dir / f"{entry.job_id}.log"

    def _execute(self, entry: JobEntry) -> None:
        job = entry.job
        sandbox = self._sandbox(entry)
        sandbox.mkdir(parents=True, exist_ok=True)
        for source, dest in job.stage_in:
            target = sandbox / dest
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(source, target)

        log_path = self._log_path(entry)
        with open(log_path, "wb", buffering=0) as log:
            log.write(
                f"[{self.name}] image {job.image_ref!r} ignored by the local back-end\n".encode()
            )
            proc = subprocess.Popen(
                job.command,
                shell=True,
                cwd=sandbox,
                env=_scrubbed_env(),
                stdout=log,
                stderr=subprocess.STDOUT,
                start_new_session=True,
            )
            with self._lock:
                entry.extra["proc"] = proc
                if entry.cancelled:
                    self._kill(entry)
            if not self._set_status(entry, JobStatus.running()):
                # cancelled between queue and start
                self._kill(entry)
                proc.wait()
                return
            try:
                timeout = job.timeout_s + TIMEOUT_GRACE_S if job.timeout_s is not None else None
                rc = proc.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                self._kill(entry)
                proc.wait()
                self._set_status(entry, JobStatus.timed_out())
                return
        if entry.cancelled:
            self._set_status(entry, JobStatus.backend_failed("cancelled"))
        else:
            # Shell convention for signal death: 128 + signal number.
            code = rc if rc >= 0 else 128 - rc
            self._set_status(entry, JobStatus.exited(code))

    def _kill(self, entry: JobEntry) -> None:
        proc = entry.extra.get("proc")
        if proc is None or proc.poll() is not None:
            return
        try:
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass
        deadline = time.monotonic() + 2.0
        while proc.poll() is None and time.monotonic() < deadline:
            time.sleep(0.01)

    def fetch_artifact(self, handle: JobHandle, path: str) -> bytes:
        entry = self._entry(handle)
        if not entry.status.is_terminal:
            raise JobNotTerminalError(f"job {handle.job_id} has not finished")
        target = self._sandbox(entry) / path
        if not target.is_file():
            raise ArtifactNotFoundError(path)
        return target.read_bytes()

    def fetch_log(self, handle: JobHandle) -> str:
        entry = self._entry(handle)
        log_path = self._log_path(entry)
        if not log_path.exists():
            return ""
        return log_path.read_text(errors="replace")
