"""Command-line front-end driving the Evaluation API.

Exit codes: 0 success, 1 workflow/API failure, 2 connection or usage error,
3 wait timeout.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path
from typing import Any

import click

from .bench import run_bench
from .client import ApiCallError, ConnectionFailed, EvalApiClient, WaitTimeout

WAIT_POLL_INTERVAL_S = 0.5


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ApiCallError as exc:
            click.echo(f"error {exc.code}: {exc.api_message}", err=True)
            sys.exit(1)
        except ConnectionFailed as exc:
            click.echo(f"connection failed: {exc}", err=True)
            sys.exit(2)
        except WaitTimeout as exc:
            click.echo(f"wait timeout: {exc}", err=True)
            sys.exit(3)

    return wrapper


def parse_set_options(pairs: tuple[str, ...]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not key or not sep:
            raise click.UsageError(f"--set expects key=value, got {pair!r}")
        out[key] = value
    return out


def coerce_overrides(
    sysdef: dict[str, Any], raw: dict[str, str]
) -> tuple[dict[str, Any], dict[str, Any]]:
    """Split raw key=value strings into typed build/run override maps.

    Values are coerced to the parameter's declared kind; unknown keys pass
    through untyped so the service can reject them with a proper error.
    """
    build_specs = sysdef.get("build_parameters", {})
    run_specs = sysdef.get("run_parameters", {})
    build: dict[str, Any] = {}
    run: dict[str, Any] = {}
    for key, value in raw.items():
        if key in build_specs:
            build[key] = _coerce_value(key, build_specs[key], value)
        elif key in run_specs:
            run[key] = _coerce_value(key, run_specs[key], value)
        else:
            run[key] = value
    return build, run


def _coerce_value(name: str, default: Any, raw: str) -> Any:
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        return raw
    if isinstance(default, (int, float)):
        try:
            return int(raw)
        except ValueError:
            try:
                return float(raw)
            except ValueError:
                return raw
    if isinstance(default, dict):
        raise click.UsageError(
            f"parameter {name!r} is file-typed; use the 'upload' command instead of --set"
        )
    return raw


@click.group()
@click.option(
    "--endpoint",
    envvar="SUNRISE_ENDPOINT",
    default="http://127.0.0.1:8800",
    show_default=True,
    help="Runtime Manager base URL.",
)
@click.option("--token", envvar="SUNRISE_AUTH_TOKEN", default=None, help="Bearer token.")
@click.option("--user", envvar="SUNRISE_USER", default=None, help="Creator name sent with requests.")
@click.pass_context
def main(ctx: click.Context, endpoint: str, token: str | None, user: str | None) -> None:
    """Client for the SUNRISE Runtime Manager."""
    ctx.obj = EvalApiClient(endpoint, token=token, user=user)


@main.command("systems-list")
@click.pass_obj
@handle_errors
def systems_list(client: EvalApiClient) -> None:
    """List the systems available in the catalog."""
    rows = client.systems()
    header = ("NAME", "VERSION", "SUMMARY")
    widths = [
        max(len(header[0]), *(len(r["name"]) for r in rows)) if rows else len(header[0]),
        max(len(header[1]), *(len(r["version"]) for r in rows)) if rows else len(header[1]),
    ]
    click.echo(f"{header[0]:<{widths[0]}}  {header[1]:<{widths[1]}}  {header[2]}")
    for row in rows:
        click.echo(f"{row['name']:<{widths[0]}}  {row['version']:<{widths[1]}}  {row['summary']}")


@main.command()
@click.argument("system")
@click.argument("version")
@click.option("--set", "set_", multiple=True, help="Parameter override key=value (repeatable).")
@click.option("--description", default="", help="Purpose of the experiment.")
@click.pass_obj
@handle_errors
def create(client: EvalApiClient, system: str, version: str, set_: tuple[str, ...], description: str) -> None:
    """Create an experiment; prints its UUID."""
    sysdef = client.system(system, version)
    build, run = coerce_overrides(sysdef, parse_set_options(set_))
    session_id = client.create_session(
        system, version, build_parameters=build, run_parameters=run, description=description
    )
    click.echo(session_id)


@main.command()
@click.argument("session_id")
@click.argument("name")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_obj
@handle_errors
def upload(client: EvalApiClient, session_id: str, name: str, file: Path) -> None:
    """Upload a file-based parameter."""
    client.upload(session_id, name, file.read_bytes(), filename=file.name)
    click.echo(f"uploaded {name}", err=True)


@main.command()
@click.argument("session_id")
@click.option("--timeout", type=float, default=None, help="Job timeout in seconds.")
@click.pass_obj
@handle_errors
def build(client: EvalApiClient, session_id: str, timeout: float | None) -> None:
    """Start the build step."""
    response = client.build(session_id, timeout_s=timeout)
    click.echo(response.get("status", "building"))


@main.command()
@click.argument("session_id")
@click.option("--timeout", type=float, default=None, help="Job timeout in seconds.")
@click.option("--set", "set_", multiple=True, help="Run parameter override key=value.")
@click.pass_obj
@handle_errors
def run(client: EvalApiClient, session_id: str, timeout: float | None, set_: tuple[str, ...]) -> None:
    """Start a run."""
    overrides = _typed_run_overrides(client, session_id, parse_set_options(set_))
    response = client.run(session_id, timeout_s=timeout, run_parameters=overrides)
    click.echo(response.get("status", "running"))


def _typed_run_overrides(
    client: EvalApiClient, session_id: str, raw: dict[str, str]
) -> dict[str, Any]:
    if not raw:
        return {}
    for summary in client.sessions():
        if summary["experiment_id"] == session_id:
            system = summary["system"]
            sysdef = client.system(system["name"], system["version"])
            build, run_ = coerce_overrides(sysdef, raw)
            # Keep build keys in the request so the service rejects them itself.
            return {**build, **run_}
    return dict(raw)


@main.command()
@click.argument("session_id")
@click.option("--wait", is_flag=True, help="Poll until no job is in flight.")
@click.option("--wait-timeout", type=float, default=None, help="Give up waiting after this many seconds.")
@click.pass_obj
@handle_errors
def status(client: EvalApiClient, session_id: str, wait: bool, wait_timeout: float | None) -> None:
    """Show (or wait for) the experiment status."""
    if wait:
        doc = client.wait(session_id, poll_interval_s=WAIT_POLL_INTERVAL_S, timeout_s=wait_timeout)
    else:
        doc = client.status(session_id)
    click.echo(json.dumps(doc, indent=2, sort_keys=True))
    if wait and doc["status"] in ("build_failed", "run_failed"):
        sys.exit(1)


@main.command()
@click.argument("session_id")
@click.argument("name")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the artifact to this file instead of stdout.")
@click.pass_obj
@handle_errors
def result(client: EvalApiClient, session_id: str, name: str, out: Path | None) -> None:
    """Download a result artifact."""
    content = client.result(session_id, name)
    if out is None:
        sys.stdout.buffer.write(content)
    else:
        out.write_bytes(content)
        click.echo(f"wrote {out} ({len(content)} bytes)", err=True)


@main.command()
@click.argument("session_id")
@click.pass_obj
@handle_errors
def log(client: EvalApiClient, session_id: str) -> None:
    """Print the current combined job log."""
    click.echo(client.log(session_id), nl=False)


@main.command()
@click.argument("session_id")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Where to store the archive ZIP (default <uuid>.zip).")
@click.pass_obj
@handle_errors
def archive(client: EvalApiClient, session_id: str, out: Path | None) -> None:
    """Archive the experiment and download the bundle."""
    try:
        client.archive(session_id)
    except ApiCallError as exc:
        if exc.code != "illegal_state" or client.status(session_id)["status"] != "archived":
            raise
    content = client.download_archive(session_id)
    target = out or Path(f"{session_id}.zip")
    target.write_bytes(content)
    click.echo(f"wrote {target} ({len(content)} bytes)", err=True)


@main.command()
@click.argument("session_id")
@click.pass_obj
@handle_errors
def delete(client: EvalApiClient, session_id: str) -> None:
    """Delete a non-archived experiment."""
    client.delete(session_id)
    click.echo("deleted", err=True)


@main.command()
@click.argument("system")
@click.argument("version")
@click.option("--apps", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of application binaries, one experiment per file.")
@click.option("--param", "file_param", required=True, help="Name of the file parameter receiving each app.")
@click.option("--metric", "metric_spec", required=True,
              help="Metric location as result_name:/json/pointer.")
@click.option("--parallel", type=int, default=4, show_default=True,
              help="Maximum experiments in flight at once.")
@click.option("--set", "set_", multiple=True, help="Parameter override key=value applied to every app.")
@click.option("--timeout", type=float, default=None, help="Per-job timeout in seconds.")
@click.pass_obj
@handle_errors
def bench(
    client: EvalApiClient,
    system: str,
    version: str,
    apps: Path,
    file_param: str,
    metric_spec: str,
    parallel: int,
    set_: tuple[str, ...],
    timeout: float | None,
) -> None:
    """Run a benchmark suite: one experiment per app, geometric-mean score."""
    sysdef = client.system(system, version)
    build_overrides, run_overrides = coerce_overrides(sysdef, parse_set_options(set_))
    try:
        report = run_bench(
            client,
            system,
            version,
            apps,
            file_param,
            metric_spec,
            parallel=parallel,
            build_parameters=build_overrides,
            run_parameters=run_overrides,
            timeout_s=timeout,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(json.dumps(report.to_json(), indent=2, sort_keys=True))

    width = max([len("APP"), *(len(r.app) for r in report.results),
                 *(len(app) for app, _ in report.failures)])
    click.echo(f"{'APP':<{width}}  METRIC", err=True)
    for entry in report.results:
        click.echo(f"{entry.app:<{width}}  {entry.metric:g}", err=True)
    for app, reason in report.failures:
        click.echo(f"{app:<{width}}  FAILED: {reason}", err=True)
    score = "n/a" if report.score is None else f"{report.score:g}"
    click.echo(f"score (geometric mean over {report.succeeded} apps): {score}", err=True)
    if report.failures:
        sys.exit(1)


if __name__ == "__main__":
    main()
