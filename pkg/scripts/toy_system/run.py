#!/usr/bin/env python3
"""Toy system run step: sleep run_time_ms, then emit metrics and a trace.

Reads syscfg.json from the job workspace. The metric written to
out/metrics.json is the float parsed from the uploaded app file's text
(1.0 when the app file is absent or unparsable), so benchmark tests can
choose their metrics exactly. fail_run (flag) writes all results and then
exits nonzero, which lets tests exercise artifact retrieval on failed runs.
"""
import json
import sys
import time
from pathlib import Path


def main() -> int:
    cfg = json.loads(Path("syscfg.json").read_text())
    params = cfg["run_parameters"]
    run_time_ms = params.get("run_time_ms", 0)
    time.sleep(run_time_ms / 1000.0)

    metric = 1.0
    app_bytes = 0
    app_path = Path(params["app"]["value"])
    if app_path.is_file():
        raw = app_path.read_bytes()
        app_bytes = len(raw)
        try:
            metric = float(raw.decode().strip())
        except (UnicodeDecodeError, ValueError):
            metric = 1.0

    out = Path("out")
    out.mkdir(exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps(
            {"relative_speed": metric, "run_time_ms": run_time_ms, "app_bytes": app_bytes},
            indent=2,
        )
    )
    (out / "trace.vcd").write_text(
        "$date toy $end\n$timescale 1ns $end\n$var wire 1 ! clk $end\n"
        f"#0\n1!\n#{int(run_time_ms) or 1}\n0!\n"
    )
    print(f"run ok: slept {run_time_ms} ms, metric {metric}")
    if params.get("fail_run"):
        print("run failed as requested by fail_run")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
