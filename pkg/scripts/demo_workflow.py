#!/usr/bin/env python3
"""End-to-end demo: start a Runtime Manager, drive the full workflow, bench.

Everything happens in a temporary directory: a toy catalog is generated, the
service is spawned as a subprocess, one experiment goes through
create/upload/build/run/results/archive, and a small benchmark fan-out is
scored. Run with:  python scripts/demo_workflow.py
"""
from __future__ import annotations

import json
import signal
import socket
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from make_toy_catalog import toy_sysdef_doc, write_catalog

from sunrise.bench import run_bench
from sunrise.client import EvalApiClient


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_ready(api: EvalApiClient, timeout_s: float = 20.0) -> None:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            api.systems()
            return
        except Exception:
            time.sleep(0.1)
    raise SystemExit("service did not become ready")


def main() -> None:
    with tempfile.TemporaryDirectory(prefix="sunrise-demo-") as raw_tmp:
        tmp = Path(raw_tmp)
        catalog = tmp / "catalog"
        write_catalog(catalog, toy_sysdef_doc())
        port = free_port()
        config_path = tmp / "service.json"
        config_path.write_text(
            json.dumps(
                {
                    "listen": f"127.0.0.1:{port}",
                    "data_dir": str(tmp / "data"),
                    "catalog_dir": str(catalog),
                }
            )
        )
        endpoint = f"http://127.0.0.1:{port}"
        print(f"starting Runtime Manager on {endpoint}")
        proc = subprocess.Popen([sys.executable, "-m", "sunrise.server", "--config", str(config_path)])
        try:
            api = EvalApiClient(endpoint)
            wait_ready(api)
            print("catalog:", [f"{s['name']} {s['version']}" for s in api.systems()])

            session_id = api.create_session(
                "toy-sim", "1.0", run_parameters={"run_time_ms": 250}, description="demo"
            )
            print("created experiment", session_id)
            api.upload(session_id, "app", b"2.5", filename="demo.app")
            api.build(session_id)
            print("build ->", api.wait(session_id)["status"])
            api.run(session_id)
            print("run   ->", api.wait(session_id)["status"])
            metrics = json.loads(api.result(session_id, "metrics"))
            print("metrics:", metrics)
            api.archive(session_id)
            bundle = api.download_archive(session_id)
            print(f"archived {len(bundle)} bytes")

            apps = tmp / "apps"
            apps.mkdir()
            for index, value in enumerate((2.0, 8.0, 1.0, 4.0)):
                (apps / f"app{index}.bin").write_text(str(value))
            report = run_bench(
                api,
                "toy-sim",
                "1.0",
                apps,
                "app",
                "metrics:/relative_speed",
                parallel=4,
                run_parameters={"run_time_ms": 100},
            )
            print(f"bench: {report.succeeded} ok, {report.failed} failed, score {report.score:g}")
        finally:
            proc.send_signal(signal.SIGINT)
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()


if __name__ == "__main__":
    main()
