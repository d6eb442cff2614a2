"""Runtime Manager service configuration.

Read from a JSON file, with SUNRISE_* environment variables taking
precedence for the fields users most often override in deployments.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import SchemaError

_CONFIG_KEYS = {
    "listen",
    "data_dir",
    "catalog_dir",
    "backends_file",
    "auth_token",
    "log_level",
    "ui_dir",
}


@dataclass
class ServiceConfig:
    data_dir: Path
    catalog_dir: Path
    listen: str = "127.0.0.1:8800"
    backends_file: Path | None = None
    auth_token: str | None = None
    log_level: str = "info"
    ui_dir: Path | None = None

    @property
    def host(self) -> str:
        host, _, _ = self.listen.rpartition(":")
        return host or "127.0.0.1"

    @property
    def port(self) -> int:
        _, _, port = self.listen.rpartition(":")
        try:
            return int(port)
        except ValueError:
            raise SchemaError(f"invalid listen address {self.listen!r}") from None

    def default_backends(self) -> list[dict[str, Any]]:
        return [
            {
                "name": "local",
                "kind": "local_process",
                "max_concurrent_jobs": 32,
                "work_dir": str(self.data_dir / "jobs" / "local"),
            }
        ]


def _env_overrides() -> dict[str, str]:
    mapping = {
        "SUNRISE_LISTEN": "listen",
        "SUNRISE_DATA_DIR": "data_dir",
        "SUNRISE_CATALOG_DIR": "catalog_dir",
        "SUNRISE_AUTH_TOKEN": "auth_token",
    }
    return {key: os.environ[env] for env, key in mapping.items() if env in os.environ}


def load_config(path: str | Path | None = None, env: bool = True) -> ServiceConfig:
    doc: dict[str, Any] = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, Mapping):
            raise SchemaError("service configuration must be a JSON object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise SchemaError(f"unknown configuration keys: {sorted(unknown)}")
        doc.update(raw)
    if env:
        doc.update(_env_overrides())
    missing = {"data_dir", "catalog_dir"} - set(doc)
    if missing:
        raise SchemaError(f"configuration requires {sorted(missing)}")
    return ServiceConfig(
        data_dir=Path(doc["data_dir"]),
        catalog_dir=Path(doc["catalog_dir"]),
        listen=doc.get("listen", "127.0.0.1:8800"),
        backends_file=Path(doc["backends_file"]) if doc.get("backends_file") else None,
        auth_token=doc.get("auth_token") or None,
        log_level=doc.get("log_level", "info"),
        ui_dir=Path(doc["ui_dir"]) if doc.get("ui_dir") else None,
    )
