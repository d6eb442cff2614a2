from __future__ import annotations

import socket
import sys
import threading
import time
from pathlib import Path

import pytest

from sunrise import sysdef as sd
from sunrise.compute import BackendRegistry, LocalProcessBackend
from sunrise.config import ServiceConfig
from sunrise.manager import RuntimeManager

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(__file__).resolve().parent / "data"

GOLDEN_SYSDEF_PATH = DATA_DIR / "agra_riscv.json"

sys.path.insert(0, str(REPO_ROOT / "scripts"))
from make_toy_catalog import toy_sysdef_doc, write_catalog  # noqa: E402


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        sys.stderr.write(f"[ACCEPTANCE] {outcome} {name}\n")


@pytest.fixture
def golden_text() -> str:
    return GOLDEN_SYSDEF_PATH.read_text()


@pytest.fixture
def golden_sysdef(golden_text) -> sd.SysDef:
    return sd.parse_sysdef(golden_text)


@pytest.fixture
def toy_catalog(tmp_path: Path) -> Path:
    catalog = tmp_path / "catalog"
    write_catalog(catalog, toy_sysdef_doc(), toy_sysdef_doc(name="toy-prebuilt", with_build=False))
    return catalog


@pytest.fixture
def service_config(tmp_path: Path, toy_catalog: Path) -> ServiceConfig:
    return ServiceConfig(data_dir=tmp_path / "data", catalog_dir=toy_catalog)


@pytest.fixture
def runtime_manager(service_config: ServiceConfig):
    backend = LocalProcessBackend(
        "local", service_config.data_dir / "jobs" / "local", max_concurrent_jobs=32
    )
    rm = RuntimeManager(service_config, registry=BackendRegistry([backend]))
    yield rm
    rm.close()


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_until(predicate, timeout_s: float = 10.0, interval_s: float = 0.05) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval_s)
    return False


def start_uvicorn(app):
    """Run an ASGI app in a daemon thread; returns (url, server, thread)."""
    import uvicorn

    port = free_port()
    uv_config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(uv_config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    assert wait_until(lambda: server.started, timeout_s=15), "uvicorn did not start"
    return f"http://127.0.0.1:{port}", server, thread


@pytest.fixture
def live_server(service_config, runtime_manager):
    from sunrise.api import create_app

    app = create_app(service_config, manager=runtime_manager)
    url, server, thread = start_uvicorn(app)
    yield url
    server.should_exit = True
    thread.join(timeout=10)
