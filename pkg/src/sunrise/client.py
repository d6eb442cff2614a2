"""Thin requests-based client for the Evaluation API."""
from __future__ import annotations

import time
from typing import Any, Mapping

import requests

# Experiment states with a job in flight; everything else is settled.
IN_FLIGHT_STATES = {"building", "running"}


class ConnectionFailed(Exception):
    """The service endpoint could not be reached."""


class ApiCallError(Exception):
    """A non-2xx response from the Evaluation API."""

    def __init__(self, status: int, code: str, message: str, detail: Any = None):
        super().__init__(f"{code}: {message}")
        self.status = status
        self.code = code
        self.api_message = message
        self.detail = detail


class WaitTimeout(Exception):
    """An experiment did not settle within the allotted wall time."""


class EvalApiClient:
    def __init__(
        self,
        endpoint: str,
        token: str | None = None,
        user: str | None = None,
        request_timeout_s: float = 60.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.request_timeout_s = request_timeout_s
        self._session = requests.Session()
        # the bench command multiplexes many workflows over one client
        adapter = requests.adapters.HTTPAdapter(pool_connections=64, pool_maxsize=64)
        self._session.mount("http://", adapter)
        self._session.mount("https://", adapter)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"
        if user:
            self._session.headers["X-Sunrise-User"] = user

    def _request(self, method: str, path: str, **kwargs) -> requests.Response:
        url = f"{self.endpoint}/v1{path}"
        kwargs.setdefault("timeout", self.request_timeout_s)
        try:
            response = self._session.request(method, url, **kwargs)
        except requests.exceptions.RequestException as exc:
            raise ConnectionFailed(f"cannot reach {self.endpoint}: {exc}") from exc
        if response.status_code >= 400:
            try:
                body = response.json()
                raise ApiCallError(
                    response.status_code,
                    body.get("code", "internal"),
                    body.get("message", response.text),
                    body.get("detail"),
                )
            except ValueError:
                raise ApiCallError(response.status_code, "internal", response.text) from None
        return response

    # -- catalog ----------------------------------------------------------

    def systems(self) -> list[dict[str, str]]:
        return self._request("GET", "/systems").json()

    def system(self, name: str, version: str) -> dict[str, Any]:
        return self._request("GET", f"/systems/{name}/{version}").json()

    # -- experiment workflow -------------------------------------------------

    def create_session(
        self,
        name: str,
        version: str,
        build_parameters: Mapping[str, Any] | None = None,
        run_parameters: Mapping[str, Any] | None = None,
        description: str = "",
    ) -> str:
        body = {
            "system": {"name": name, "version": version},
            "build_parameters": dict(build_parameters or {}),
            "run_parameters": dict(run_parameters or {}),
            "description": description,
        }
        return self._request("POST", "/session", json=body).json()["experiment_id"]

    def sessions(self, creator: str | None = None, status: str | None = None) -> list[dict]:
        params = {}
        if creator:
            params["creator"] = creator
        if status:
            params["status"] = status
        return self._request("GET", "/session", params=params).json()

    def set_parameters(self, session_id: str, parameters: Mapping[str, Any]) -> dict:
        return self._request(
            "POST", f"/session/{session_id}/parameters", json={"parameters": dict(parameters)}
        ).json()

    def upload(self, session_id: str, name: str, content: bytes, filename: str = "upload") -> None:
        self._request(
            "POST",
            f"/session/{session_id}/parameter",
            data={"name": name},
            files={"file": (filename, content)},
        )

    def build(self, session_id: str, timeout_s: float | None = None) -> dict:
        body = {"timeout_s": timeout_s} if timeout_s is not None else {}
        return self._request("POST", f"/session/{session_id}/build", json=body).json()

    def run(
        self,
        session_id: str,
        timeout_s: float | None = None,
        run_parameters: Mapping[str, Any] | None = None,
    ) -> dict:
        body: dict[str, Any] = {}
        if timeout_s is not None:
            body["timeout_s"] = timeout_s
        if run_parameters:
            body["run_parameters"] = dict(run_parameters)
        return self._request("POST", f"/session/{session_id}/run", json=body).json()

    def status(self, session_id: str) -> dict:
        return self._request("GET", f"/session/{session_id}/status").json()

    def log(self, session_id: str) -> str:
        return self._request("GET", f"/session/{session_id}/log").text

    def result(self, session_id: str, name: str) -> bytes:
        return self._request("GET", f"/session/{session_id}/result/{name}").content

    def archive(self, session_id: str) -> str:
        return self._request("POST", f"/session/{session_id}/archive").json()["archive_url"]

    def download_archive(self, session_id: str) -> bytes:
        return self._request("GET", f"/session/{session_id}/archive").content

    def delete(self, session_id: str) -> None:
        self._request("DELETE", f"/session/{session_id}")

    def wait(
        self,
        session_id: str,
        poll_interval_s: float = 0.5,
        timeout_s: float | None = None,
    ) -> dict:
        """Poll until no job is in flight; returns the final status document."""
        deadline = time.monotonic() + timeout_s if timeout_s is not None else None
        while True:
            status = self.status(session_id)
            if status["status"] not in IN_FLIGHT_STATES:
                return status
            if deadline is not None and time.monotonic() >= deadline:
                raise WaitTimeout(
                    f"experiment {session_id} still {status['status']} after {timeout_s} s"
                )
            time.sleep(poll_interval_s)
