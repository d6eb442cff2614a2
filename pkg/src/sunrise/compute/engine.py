"""Container-engine back-end: drives an external engine over its HTTP API.

Per job: create a container from the image with the job command, upload the
stage-in files as a tar archive, start, wait for exit (bounded by the job
timeout), pull the log and the fetch-out paths, then remove the container.
Fetched bytes are cached locally so artifacts stay retrievable after removal.
"""
from __future__ import annotations

import io
import posixpath
import tarfile
import threading
from typing import Any

import requests

from ..errors import (
    ArtifactNotFoundError,
    BackendUnreachableError,
    JobNotTerminalError,
)
from .base import ComputeJob, JobEntry, JobHandle, JobStatus, QueuedBackend

_STREAM_HEADER_LEN = 8


def demux_log_stream(data: bytes) -> str:
    """Decode an engine log stream.

    Non-TTY engine logs are framed: 1 byte stream id, 3 zero bytes, 4 bytes
    big-endian payload length. Falls back to the raw text when the data does
    not parse as frames.
    """
    chunks: list[bytes] = []
    offset = 0
    while offset < len(data):
        header = data[offset : offset + _STREAM_HEADER_LEN]
        if len(header) < _STREAM_HEADER_LEN or header[0] not in (0, 1, 2) or header[1:4] != b"\x00\x00\x00":
            return data.decode(errors="replace")
        size = int.from_bytes(header[4:8], "big")
        start = offset + _STREAM_HEADER_LEN
        if start + size > len(data):
            return data.decode(errors="replace")
        chunks.append(data[start : start + size])
        offset = start + size
    return b"".join(chunks).decode(errors="replace")


def pack_tar(files: list[tuple[str, bytes]]) -> bytes:
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w") as tar:
        for arcname, content in files:
            info = tarfile.TarInfo(name=arcname)
            info.size = len(content)
            info.mode = 0o644
            tar.addfile(info, io.BytesIO(content))
    return buf.getvalue()


def extract_file_from_tar(data: bytes, filename: str) -> bytes:
    with tarfile.open(fileobj=io.BytesIO(data), mode="r") as tar:
        members = [m for m in tar.getmembers() if m.isfile()]
        for member in members:
            if posixpath.basename(member.name) == filename:
                fileobj = tar.extractfile(member)
                if fileobj is not None:
                    return fileobj.read()
        if len(members) == 1:
            fileobj = tar.extractfile(members[0])
            if fileobj is not None:
                return fileobj.read()
    raise KeyError(filename)


class ContainerEngineBackend(QueuedBackend):
    def __init__(
        self,
        name: str,
        endpoint: str,
        api_version: str = "1.43",
        max_concurrent_jobs: int = 4,
        container_workdir: str = "/workspace",
        request_timeout_s: float = 30.0,
    ):
        super().__init__(name, "container_engine", max_concurrent_jobs)
        self.endpoint = endpoint.rstrip("/")
        self.api_version = api_version
        self.container_workdir = container_workdir
        self.request_timeout_s = request_timeout_s
        self._session = requests.Session()
        self._session_lock = threading.Lock()

    def _url(self, path: str) -> str:
        return f"{self.endpoint}/v{self.api_version}{path}"

    def _request(self, method: str, path: str, *, timeout: float | None = None, **kwargs) -> requests.Response:
        try:
            response = self._session.request(
                method, self._url(path), timeout=timeout or self.request_timeout_s, **kwargs
            )
        except requests.exceptions.Timeout:
            raise
        except requests.exceptions.RequestException as exc:
            raise BackendUnreachableError(f"engine {self.endpoint} unreachable: {exc}") from exc
        return response

    def _check_reachable(self, job: ComputeJob) -> None:
        try:
            response = self._session.get(f"{self.endpoint}/_ping", timeout=self.request_timeout_s)
        except requests.exceptions.RequestException as exc:
            raise BackendUnreachableError(f"engine {self.endpoint} unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise BackendUnreachableError(f"engine {self.endpoint} returned {response.status_code} on ping")

    def _engine_error(self, response: requests.Response, doing: str) -> JobStatus:
        return JobStatus.backend_failed(f"{doing} failed: HTTP {response.status_code} {response.text[:200]}")

    def _execute(self, entry: JobEntry) -> None:
        job = entry.job
        create_body: dict[str, Any] = {
            "Image": job.image_ref,
            "Cmd": ["/bin/sh", "-c", job.command],
            "WorkingDir": self.container_workdir,
        }
        response = self._request("POST", "/containers/create", json=create_body)
        if response.status_code not in (200, 201):
            self._set_status(entry, self._engine_error(response, "container create"))
            return
        container_id = response.json()["Id"]
        entry.extra["container_id"] = container_id
        try:
            if job.stage_in:
                files = []
                for source, dest in job.stage_in:
                    with open(source, "rb") as fh:
                        files.append((dest, fh.read()))
                response = self._request(
                    "PUT",
                    f"/containers/{container_id}/archive",
                    params={"path": self.container_workdir},
                    data=pack_tar(files),
                    headers={"Content-Type": "application/x-tar"},
                )
                if response.status_code not in (200, 204):
                    self._set_status(entry, self._engine_error(response, "stage-in copy"))
                    return

            response = self._request("POST", f"/containers/{container_id}/start")
            if response.status_code not in (200, 204):
                self._set_status(entry, self._engine_error(response, "container start"))
                return
            if not self._set_status(entry, JobStatus.running()):
                self._kill(entry)
                return

            wait_timeout = (
                job.timeout_s + 1.0 if job.timeout_s is not None else None
            )
            try:
                response = self._request(
                    "POST", f"/containers/{container_id}/wait", timeout=wait_timeout
                )
            except requests.exceptions.Timeout:
                self._kill(entry)
                self._collect_outputs(entry, container_id)
                self._set_status(entry, JobStatus.timed_out())
                return
            if response.status_code != 200:
                self._set_status(entry, self._engine_error(response, "container wait"))
                return
            exit_code = int(response.json().get("StatusCode", -1))
            self._collect_outputs(entry, container_id)
            if entry.cancelled:
                self._set_status(entry, JobStatus.backend_failed("cancelled"))
            else:
                self._set_status(entry, JobStatus.exited(exit_code))
        finally:
            self._remove_container(container_id)

    def _collect_outputs(self, entry: JobEntry, container_id: str) -> None:
        """Pull the log and every fetch-out path into the local cache."""
        try:
            response = self._request(
                "GET",
                f"/containers/{container_id}/logs",
                params={"stdout": "1", "stderr": "1"},
            )
            if response.status_code == 200:
                entry.extra["log"] = demux_log_stream(response.content)
        except BackendUnreachableError:
            pass
        artifacts: dict[str, bytes] = {}
        for path in entry.job.fetch_out:
            try:
                response = self._request(
                    "GET",
                    f"/containers/{container_id}/archive",
                    params={"path": posixpath.join(self.container_workdir, path)},
                )
            except BackendUnreachableError:
                continue
            if response.status_code != 200:
                continue
            try:
                artifacts[path] = extract_file_from_tar(response.content, posixpath.basename(path))
            except (KeyError, tarfile.TarError):
                continue
        entry.extra["artifacts"] = artifacts

    def _remove_container(self, container_id: str) -> None:
        try:
            self._request("DELETE", f"/containers/{container_id}", params={"force": "1"})
        except BackendUnreachableError:
            pass

    def _kill(self, entry: JobEntry) -> None:
        container_id = entry.extra.get("container_id")
        if not container_id:
            return
        try:
            self._request("POST", f"/containers/{container_id}/kill")
        except BackendUnreachableError:
            pass

    def fetch_artifact(self, handle: JobHandle, path: str) -> bytes:
        entry = self._entry(handle)
        if not entry.status.is_terminal:
            raise JobNotTerminalError(f"job {handle.job_id} has not finished")
        artifacts: dict[str, bytes] = entry.extra.get("artifacts", {})
        if path not in artifacts:
            raise ArtifactNotFoundError(path)
        return artifacts[path]

    def fetch_log(self, handle: JobHandle) -> str:
        entry = self._entry(handle)
        log = entry.extra.get("log")
        if log is not None:
            return log
        container_id = entry.extra.get("container_id")
        if not container_id:
            return ""
        try:
            response = self._request(
                "GET",
                f"/containers/{container_id}/logs",
                params={"stdout": "1", "stderr": "1"},
            )
        except BackendUnreachableError:
            return ""
        if response.status_code != 200:
            return ""
        return demux_log_stream(response.content)
