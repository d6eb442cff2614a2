"""Runtime Manager: orchestrates experiments across catalog, store and compute.

All mutations of a single experiment are serialized through one lock per
experiment; job completion is observed by a supervisor thread per in-flight
job which re-enters the same lock to apply the outcome. Experiments are
persisted after every mutation so the service survives restarts.
"""
from __future__ import annotations

import json
import logging
import threading
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Mapping

from . import sysdef as sd
from .compute import BackendRegistry, ComputeJob, JobHandle, load_backends_file
from .compute.registry import build_backend
from .config import ServiceConfig
from .errors import (
    ArtifactNotFoundError,
    IllegalTransitionError,
    NotAFileParameterError,
    SchemaError,
    UnknownExperimentError,
    UnknownResultError,
    UnknownSystemError,
)
from .experiment import (
    Event,
    Experiment,
    ExperimentState,
    JobRecord,
    create_experiment,
    transition,
    utc_now_iso,
)
from .store import CatalogSnapshot, ExperimentStore, load_catalog

logger = logging.getLogger("sunrise.manager")

POLL_INTERVAL_S = 0.05


class RuntimeManager:
    def __init__(self, config: ServiceConfig, registry: BackendRegistry | None = None):
        self.config = config
        self.store = ExperimentStore(config.data_dir)
        self.catalog: CatalogSnapshot = load_catalog(config.catalog_dir)
        for issue in self.catalog.issues:
            logger.warning("catalog: %s: %s", issue.source, issue.reason)
        if registry is not None:
            self.registry = registry
        elif config.backends_file is not None:
            self.registry = load_backends_file(config.backends_file, config.data_dir / "jobs")
        else:
            self.registry = BackendRegistry(
                [build_backend(entry, config.data_dir / "jobs") for entry in config.default_backends()]
            )
        self._experiments: dict[str, Experiment] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()
        self._recover()

    # -- bookkeeping -------------------------------------------------------

    def _register(self, exp: Experiment) -> None:
        with self._registry_lock:
            self._experiments[exp.id] = exp
            self._locks[exp.id] = threading.RLock()

    def _get(self, exp_id: str) -> Experiment:
        exp = self._experiments.get(exp_id)
        if exp is None:
            raise UnknownExperimentError(f"unknown experiment {exp_id!r}")
        return exp

    @contextmanager
    def _locked(self, exp_id: str) -> Iterator[Experiment]:
        with self._registry_lock:
            lock = self._locks.get(exp_id)
        if lock is None:
            raise UnknownExperimentError(f"unknown experiment {exp_id!r}")
        with lock:
            yield self._get(exp_id)

    def _recover(self) -> None:
        """Reload persisted experiments; jobs lost to a restart become failures."""
        for exp_id in self.store.list_experiment_ids():
            try:
                exp = self.store.load_experiment(exp_id)
            except Exception as exc:  # noqa: BLE001 - a bad document must not sink the service
                logger.error("skipping corrupt experiment %s: %s", exp_id, exc)
                continue
            if exp.state is ExperimentState.BUILDING:
                exp.finish_build(False, "build interrupted by a service restart")
                self.store.persist_experiment(exp)
            elif exp.state is ExperimentState.RUNNING:
                exp.finish_run(False, exp.results_index, "run interrupted by a service restart")
                self.store.persist_experiment(exp)
            self._register(exp)

    def reload_catalog(self) -> CatalogSnapshot:
        self.catalog = load_catalog(self.config.catalog_dir)
        return self.catalog

    def close(self) -> None:
        self.registry.close()

    # -- catalog -----------------------------------------------------------

    def get_system(self, name: str, version: str) -> sd.SysDef:
        sysdef = self.catalog.find(name, version)
        if sysdef is None:
            raise UnknownSystemError(f"unknown system {name!r} version {version!r}")
        return sysdef

    # -- experiment lifecycle ------------------------------------------------

    def create(
        self,
        system_name: str,
        system_version: str,
        build_overrides: Mapping[str, Any] | None = None,
        run_overrides: Mapping[str, Any] | None = None,
        creator: str = "anonymous",
        description: str = "",
    ) -> Experiment:
        sysdef = self.get_system(system_name, system_version)
        cfg = sd.derive_syscfg(sysdef)
        cfg = sd.apply_overrides(cfg, sysdef, build_overrides or {})
        cfg = sd.apply_overrides(cfg, sysdef, run_overrides or {})
        exp = create_experiment(cfg, sysdef, creator=creator, description=description)
        self.store.workspace_dir(exp.id).mkdir(parents=True, exist_ok=True)
        self.store.persist_experiment(exp)
        self._register(exp)
        return exp

    def get_experiment(self, exp_id: str) -> Experiment:
        return self._get(exp_id)

    def list_experiments(
        self, creator: str | None = None, status: str | None = None
    ) -> list[Experiment]:
        out = []
        for exp_id in sorted(self._experiments):
            exp = self._experiments[exp_id]
            if creator is not None and exp.creator != creator:
                continue
            if status is not None and exp.state.value != status:
                continue
            out.append(exp)
        return out

    def set_parameters(self, exp_id: str, overrides: Mapping[str, Any]) -> Experiment:
        with self._locked(exp_id) as exp:
            exp.set_parameters(exp.sysdef_snapshot, overrides)
            self.store.persist_experiment(exp)
            return exp

    def upload_parameter(self, exp_id: str, name: str, content: bytes) -> Experiment:
        with self._locked(exp_id) as exp:
            exp.require_quiescent(Event.RUN_PARAMS_CHANGED)
            spec = exp.sysdef_snapshot.param_spec(name)  # raises UnknownParameterError
            if spec.default.kind is not sd.ParamKind.FILE:
                raise NotAFileParameterError(name)
            rel = self.store.save_upload(exp_id, name, content)
            exp.record_upload(exp.sysdef_snapshot, name, rel)
            self.store.persist_experiment(exp)
            return exp

    # -- jobs ----------------------------------------------------------------

    def _staged_file_map(self, exp: Experiment) -> dict[str, str]:
        """Workspace path per file parameter: the upload, or the in-image default."""
        staged: dict[str, str] = {}
        for name, value in exp.cfg.file_parameters().items():
            staged[name] = exp.uploads.get(name, str(value.value))
        return staged

    def _materialize(self, exp: Experiment) -> bytes:
        document = sd.materialize_syscfg(exp.cfg, self._staged_file_map(exp))
        self.store.write_syscfg(exp.id, document)
        return document

    def _stage_in(self, exp: Experiment) -> tuple[tuple[str, str], ...]:
        workspace = self.store.workspace_dir(exp.id)
        pairs = [(str(workspace / "syscfg.json"), "syscfg.json")]
        for name, rel in exp.uploads.items():
            pairs.append((str(workspace / rel), rel))
        return tuple(pairs)

    def start_build(self, exp_id: str, timeout_s: float | None = None) -> Experiment:
        with self._locked(exp_id) as exp:
            sysdef = exp.sysdef_snapshot
            if not sysdef.has_build_step:
                # Pre-built system: nothing to do, report the current state.
                if exp.state in (ExperimentState.RUNNING, ExperimentState.ARCHIVED):
                    raise IllegalTransitionError(exp.state.value, Event.BUILD_REQUESTED.value)
                return exp
            transition(exp.state, Event.BUILD_REQUESTED)  # legality check before submission
            self._materialize(exp)
            job = ComputeJob(
                experiment_id=exp.id,
                phase="build",
                image_ref=sysdef.image_ref,
                command=sysdef.build_command or "",
                stage_in=self._stage_in(exp),
                fetch_out=(),
                timeout_s=timeout_s,
            )
            handle = self.registry.submit(job)
            exp.start_build(
                JobRecord(handle.job_id, handle.backend, "build", started_at=utc_now_iso())
            )
            self.store.persist_experiment(exp)
        self._spawn_supervisor(exp_id, "build", handle)
        return self._get(exp_id)

    def start_run(
        self,
        exp_id: str,
        timeout_s: float | None = None,
        run_overrides: Mapping[str, Any] | None = None,
    ) -> Experiment:
        with self._locked(exp_id) as exp:
            sysdef = exp.sysdef_snapshot
            self._check_run_admissible(exp)
            if run_overrides:
                for name in run_overrides:
                    info = sd.classify_param(sysdef, name)  # raises UnknownParameterError
                    if info.phase is sd.Phase.BUILD:
                        raise SchemaError(
                            f"build parameter {name!r} cannot be overridden on run",
                            {"parameter": name},
                        )
                exp.set_parameters(sysdef, run_overrides)
            self._materialize(exp)
            job = ComputeJob(
                experiment_id=exp.id,
                phase="run",
                image_ref=sysdef.image_ref,
                command=sysdef.run_command,
                stage_in=self._stage_in(exp),
                fetch_out=tuple(r.path for r in sysdef.results.values()),
                timeout_s=timeout_s,
            )
            handle = self.registry.submit(job)
            exp.start_run(
                JobRecord(handle.job_id, handle.backend, "run", started_at=utc_now_iso())
            )
            self.store.persist_experiment(exp)
        self._spawn_supervisor(exp_id, "run", handle)
        return self._get(exp_id)

    def _check_run_admissible(self, exp: Experiment) -> None:
        try:
            transition(exp.state, Event.RUN_REQUESTED)
        except IllegalTransitionError:
            if exp.state in (
                ExperimentState.CREATED,
                ExperimentState.BUILDING,
                ExperimentState.BUILD_FAILED,
            ):
                raise IllegalTransitionError(
                    exp.state.value,
                    Event.RUN_REQUESTED.value,
                    "run requires a finished build",
                ) from None
            raise

    def _spawn_supervisor(self, exp_id: str, phase: str, handle: JobHandle) -> None:
        thread = threading.Thread(
            target=self._supervise,
            args=(exp_id, phase, handle),
            name=f"supervise-{phase}-{exp_id[:8]}",
            daemon=True,
        )
        thread.start()

    def _supervise(self, exp_id: str, phase: str, handle: JobHandle) -> None:
        backend = self.registry.backend_for(handle)
        while True:
            status = backend.poll(handle)
            if status.is_terminal:
                break
            time.sleep(POLL_INTERVAL_S)
        try:
            log_rel = self.store.store_log(
                exp_id, f"{phase}-{handle.job_id}.log", backend.fetch_log(handle)
            )
        except Exception:  # noqa: BLE001 - the log is best-effort
            log_rel = None

        results = {}
        if phase == "run":
            exp = self._get(exp_id)
            for name, rspec in exp.sysdef_snapshot.results.items():
                try:
                    content = backend.fetch_artifact(handle, rspec.path)
                except ArtifactNotFoundError:
                    continue
                results[name] = self.store.store_artifact(exp, name, content)

        message = None if status.succeeded else status.describe()
        with self._locked(exp_id) as exp:
            record = exp.build_record if phase == "build" else exp.run_record
            if record is not None and record.job_id == handle.job_id:
                record.ended_at = utc_now_iso()
                record.exit = {
                    "state": status.state.value,
                    "code": status.exit_code,
                    "reason": status.reason,
                }
                record.log_path = log_rel
            if phase == "build":
                exp.finish_build(status.succeeded, message)
            else:
                exp.finish_run(status.succeeded, results, message)
            self.store.persist_experiment(exp)

    # -- read-side operations ---------------------------------------------------

    def get_status(self, exp_id: str) -> dict[str, Any]:
        exp = self._get(exp_id)
        job_info = None
        if exp.state is ExperimentState.BUILDING and exp.build_record:
            record = exp.build_record
            job_info = {"phase": "build", "backend": record.backend, "job_id": record.job_id}
        elif exp.state is ExperimentState.RUNNING and exp.run_record:
            record = exp.run_record
            job_info = {"phase": "run", "backend": record.backend, "job_id": record.job_id}
        out: dict[str, Any] = {"status": exp.state.value, "since": exp.state_since}
        if job_info is not None:
            out["job"] = job_info
        if exp.last_message:
            out["message"] = exp.last_message
        return out

    def get_result(self, exp_id: str, name: str) -> tuple[Path, str]:
        """Path of a stored result artifact plus its declared type tag."""
        exp = self._get(exp_id)
        if exp.state not in (ExperimentState.COMPLETED, ExperimentState.RUN_FAILED):
            raise IllegalTransitionError(
                exp.state.value, "result_fetch", "result artifacts require a finished run"
            )
        if name not in exp.sysdef_snapshot.results:
            raise UnknownResultError(name, declared=False)
        ref = exp.results_index.get(name)
        if ref is None:
            raise UnknownResultError(name, declared=True)
        return self.store.artifact_file(exp_id, ref), ref.declared_type

    def get_log(self, exp_id: str) -> str:
        exp = self._get(exp_id)
        record = None
        if exp.state is ExperimentState.BUILDING:
            record = exp.build_record
        elif exp.state is ExperimentState.RUNNING:
            record = exp.run_record
        if record is not None:
            try:
                return self.registry.fetch_log(JobHandle(record.job_id, record.backend))
            except Exception:  # noqa: BLE001 - fall through to the stored log
                pass
        for candidate in (exp.run_record, exp.build_record):
            if candidate is not None and candidate.log_path:
                return self.store.read_log(exp_id, candidate.log_path)
        return ""

    # -- archive and deletion ------------------------------------------------------

    def archive(self, exp_id: str) -> Path:
        with self._locked(exp_id) as exp:
            transition(exp.state, Event.ARCHIVE_REQUESTED)  # legality check first
            raw = self.store.read_syscfg(exp_id)
            if raw is None:
                raw = self._materialize(exp)
            syscfg_doc = json.loads(raw)
            previous_state, previous_since = exp.state, exp.state_since
            exp.mark_archived()
            try:
                path = self.store.write_archive(exp, syscfg_doc)
            except Exception:
                exp.state, exp.state_since = previous_state, previous_since
                raise
            self.store.persist_experiment(exp)
            return path

    def archive_file(self, exp_id: str) -> Path:
        self._get(exp_id)
        path = self.store.archive_path(exp_id)
        if not path.is_file():
            raise UnknownResultError("archive", declared=False)
        return path

    def delete(self, exp_id: str) -> None:
        with self._locked(exp_id) as exp:
            if exp.state not in (
                ExperimentState.CREATED,
                ExperimentState.BUILT,
                ExperimentState.BUILD_FAILED,
                ExperimentState.COMPLETED,
                ExperimentState.RUN_FAILED,
            ):
                raise IllegalTransitionError(exp.state.value, "delete")
            self.store.delete_experiment(exp_id)
        with self._registry_lock:
            self._experiments.pop(exp_id, None)
            self._locks.pop(exp_id, None)
