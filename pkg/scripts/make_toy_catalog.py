#!/usr/bin/env python3
"""Write a catalog of toy systems for local experimentation and testing.

The toy system's build and run steps are the scripts in scripts/toy_system/,
executed by the local-process back-end; see their docstrings for the
parameters they honor.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

TOY_SCRIPTS = Path(__file__).resolve().parent / "toy_system"


def toy_sysdef_doc(
    name: str = "toy-sim",
    version: str = "1.0",
    with_build: bool = True,
    python: str | None = None,
) -> dict:
    python = python or sys.executable or "python3"
    doc = {
        "name": name,
        "version": version,
        "documentation": {
            "contact": "toy",
            "summary": "Toy simulation system",
            "description": "Sleeps for run_time_ms and writes metrics plus a trace.",
        },
        "docker_image": "registry.invalid/toy-sim:1.0",
        "run_command": f"{python} {TOY_SCRIPTS / 'run.py'}",
        "run_parameters": {
            "run_time_ms": 50,
            "app": {"value": "builtin.app", "is_file": True},
            "fail_run": False,
        },
        "results": {
            "metrics": {"path": "out/metrics.json", "type": "json"},
            "signal_trace": {"path": "out/trace.vcd", "type": "vcd"},
            "config_echo": {"path": "syscfg.json", "type": "json"},
        },
    }
    if with_build:
        doc["build_command"] = f"{python} {TOY_SCRIPTS / 'build.py'}"
        doc["build_parameters"] = {
            "compile_args": "-O2",
            "fail_build": False,
            "build_sleep_ms": 0,
        }
    return doc


def write_catalog(catalog_dir: Path, *docs: dict) -> None:
    catalog_dir.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        path = catalog_dir / f"{doc['name']}-{doc['version']}.json"
        path.write_text(json.dumps(doc, indent=2))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", type=Path, help="catalog directory to create")
    parser.add_argument(
        "--service-config",
        type=Path,
        default=None,
        help="also write a ready-to-run service configuration JSON here",
    )
    parser.add_argument("--data-dir", type=Path, default=Path("sunrise-data"))
    parser.add_argument("--listen", default="127.0.0.1:8800")
    args = parser.parse_args()

    write_catalog(args.out, toy_sysdef_doc(), toy_sysdef_doc(name="toy-prebuilt", with_build=False))
    print(f"wrote catalog with toy-sim and toy-prebuilt to {args.out}")
    if args.service_config is not None:
        args.service_config.write_text(
            json.dumps(
                {
                    "listen": args.listen,
                    "data_dir": str(args.data_dir),
                    "catalog_dir": str(args.out),
                },
                indent=2,
            )
        )
        print(f"wrote service config to {args.service_config}")


if __name__ == "__main__":
    main()
