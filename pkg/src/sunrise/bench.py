"""Benchmark fan-out: one experiment per application binary, scored together.

Each app file becomes its own experiment (create, build, upload, run); the
metric is pulled out of a declared JSON result with an RFC 6901 pointer and
the per-app metrics aggregate into a geometric-mean score.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .client import ApiCallError, EvalApiClient


class EmptyMetricsError(ValueError):
    def __init__(self):
        super().__init__("cannot aggregate an empty metric list")


class NonPositiveMetricError(ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"metric #{index} is {value}; the geometric mean needs positive values")
        self.index = index
        self.value = value


def aggregate_score(metrics: Sequence[float]) -> float:
    """Geometric mean, computed as exp(mean(ln m)) for overflow safety."""
    if not metrics:
        raise EmptyMetricsError()
    logs = []
    for index, metric in enumerate(metrics):
        if not math.isfinite(metric) or metric <= 0:
            raise NonPositiveMetricError(index, metric)
        logs.append(math.log(metric))
    return math.exp(math.fsum(logs) / len(logs))


def resolve_json_pointer(doc: Any, pointer: str) -> Any:
    """RFC 6901 JSON pointer lookup ('' is the whole document)."""
    if pointer == "":
        return doc
    if not pointer.startswith("/"):
        raise ValueError(f"invalid JSON pointer {pointer!r}: must start with '/'")
    node = doc
    for token in pointer.split("/")[1:]:
        token = token.replace("~1", "/").replace("~0", "~")
        if isinstance(node, list):
            try:
                node = node[int(token)]
            except (ValueError, IndexError) as exc:
                raise KeyError(f"pointer {pointer!r}: bad array index {token!r}") from exc
        elif isinstance(node, dict):
            if token not in node:
                raise KeyError(f"pointer {pointer!r}: no member {token!r}")
            node = node[token]
        else:
            raise KeyError(f"pointer {pointer!r}: cannot descend into {type(node).__name__}")
    return node


@dataclass
class BenchResult:
    app: str
    experiment_id: str
    metric: float
    artifacts: list[str] = field(default_factory=list)


@dataclass
class BenchReport:
    system: str
    version: str
    results: list[BenchResult]
    failures: list[tuple[str, str]]
    score: float | None

    @property
    def succeeded(self) -> int:
        return len(self.results)

    @property
    def failed(self) -> int:
        return len(self.failures)

    def to_json(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "version": self.version,
            "score": self.score,
            "succeeded": self.succeeded,
            "failed": self.failed,
            "results": [
                {
                    "app": r.app,
                    "experiment_id": r.experiment_id,
                    "metric": r.metric,
                    "artifacts": r.artifacts,
                }
                for r in self.results
            ],
            "failures": [{"app": app, "reason": reason} for app, reason in self.failures],
        }


def parse_metric_spec(spec: str) -> tuple[str, str]:
    """Split 'result_name:/json/pointer' into its two halves."""
    name, sep, pointer = spec.partition(":")
    if not name or not sep:
        raise ValueError(f"metric spec {spec!r} must look like 'result_name:/json/pointer'")
    return name, pointer


def _run_one_app(
    client: EvalApiClient,
    system: str,
    version: str,
    has_build_step: bool,
    app_path: Path,
    file_param: str,
    metric_result: str,
    metric_pointer: str,
    build_parameters: dict[str, Any],
    run_parameters: dict[str, Any],
    timeout_s: float | None,
    poll_interval_s: float,
) -> BenchResult:
    session_id = client.create_session(
        system,
        version,
        build_parameters=build_parameters,
        run_parameters=run_parameters,
        description=f"bench {app_path.name}",
    )
    client.upload(session_id, file_param, app_path.read_bytes(), filename=app_path.name)
    if has_build_step:
        client.build(session_id, timeout_s=timeout_s)
        status = client.wait(session_id, poll_interval_s=poll_interval_s)
        if status["status"] != "built":
            raise RuntimeError(f"build ended in {status['status']}: {status.get('message', '')}")
    client.run(session_id, timeout_s=timeout_s)
    status = client.wait(session_id, poll_interval_s=poll_interval_s)
    if status["status"] != "completed":
        raise RuntimeError(f"run ended in {status['status']}: {status.get('message', '')}")
    payload = client.result(session_id, metric_result)
    try:
        metric_raw = resolve_json_pointer(json.loads(payload), metric_pointer)
    except (ValueError, KeyError) as exc:
        raise RuntimeError(f"metric extraction failed: {exc}") from exc
    metric = float(metric_raw)
    if not math.isfinite(metric) or metric <= 0:
        raise RuntimeError(f"metric {metric!r} is not a positive real")
    return BenchResult(
        app=app_path.name,
        experiment_id=session_id,
        metric=metric,
        artifacts=[metric_result],
    )


def run_bench(
    client: EvalApiClient,
    system: str,
    version: str,
    apps_dir: str | Path,
    file_param: str,
    metric_spec: str,
    parallel: int = 4,
    build_parameters: dict[str, Any] | None = None,
    run_parameters: dict[str, Any] | None = None,
    timeout_s: float | None = None,
    poll_interval_s: float = 0.2,
) -> BenchReport:
    """Fan out one experiment per app file, at most ``parallel`` in flight."""
    metric_result, metric_pointer = parse_metric_spec(metric_spec)
    apps = sorted(p for p in Path(apps_dir).iterdir() if p.is_file())
    if not apps:
        raise ValueError(f"apps directory {apps_dir} contains no files")

    sysdef = client.system(system, version)
    if metric_result not in sysdef.get("results", {}):
        raise ValueError(f"result {metric_result!r} is not declared by {system} {version}")
    has_build_step = bool(sysdef.get("build_command"))

    results: list[BenchResult] = []
    failures: list[tuple[str, str]] = []

    def task(app_path: Path):
        return _run_one_app(
            client,
            system,
            version,
            has_build_step,
            app_path,
            file_param,
            metric_result,
            metric_pointer,
            build_parameters or {},
            run_parameters or {},
            timeout_s,
            poll_interval_s,
        )

    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        futures = {app.name: pool.submit(task, app) for app in apps}
        for app_name, future in futures.items():
            try:
                results.append(future.result())
            except (ApiCallError, RuntimeError, OSError) as exc:
                failures.append((app_name, str(exc)))

    score = aggregate_score([r.metric for r in results]) if results else None
    return BenchReport(
        system=system, version=version, results=results, failures=failures, score=score
    )
