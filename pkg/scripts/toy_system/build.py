#!/usr/bin/env python3
"""Toy system build step: reads syscfg.json and writes a build marker.

Build parameters: compile_args (text, echoed into the marker), fail_build
(flag, forces a nonzero exit), build_sleep_ms (number, simulates a slow build).
"""
import json
import sys
import time
from pathlib import Path


def main() -> int:
    cfg = json.loads(Path("syscfg.json").read_text())
    params = cfg["build_parameters"]
    time.sleep(params.get("build_sleep_ms", 0) / 1000.0)
    if params.get("fail_build"):
        print("build failed as requested by fail_build")
        return 1
    Path("built.marker").write_text(f"compile_args={params.get('compile_args', '')}\n")
    print("build ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
