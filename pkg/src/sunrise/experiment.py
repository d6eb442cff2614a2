"""Experiment lifecycle: state machine, metadata, uploads and parameter edits.

An experiment is a user-owned session binding one SysCfg to a build/run
lifecycle. The transition table is the single source of truth for which
events are legal in which state; higher-level operations (parameter edits,
uploads) translate into those events.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Mapping

from . import sysdef as sd
from .errors import (
    CfgMismatchError,
    IllegalTransitionError,
    NotAFileParameterError,
    UnknownParameterError,
)


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def new_experiment_id() -> str:
    return str(uuid.uuid4())


class ExperimentState(str, Enum):
    CREATED = "created"
    BUILDING = "building"
    BUILT = "built"
    BUILD_FAILED = "build_failed"
    RUNNING = "running"
    COMPLETED = "completed"
    RUN_FAILED = "run_failed"
    ARCHIVED = "archived"


class Event(str, Enum):
    BUILD_REQUESTED = "build_requested"
    BUILD_SUCCEEDED = "build_succeeded"
    BUILD_FAILED = "build_failed"
    RUN_REQUESTED = "run_requested"
    RUN_SUCCEEDED = "run_succeeded"
    RUN_FAILED = "run_failed"
    BUILD_PARAMS_CHANGED = "build_params_changed"
    RUN_PARAMS_CHANGED = "run_params_changed"
    ARCHIVE_REQUESTED = "archive_requested"


S = ExperimentState
E = Event

# The documented (state, event) -> state table. Pairs absent here are illegal;
# ARCHIVED is absorbing. run_params_changed is a legal self-loop in the four
# states where run parameters may be edited.
TRANSITIONS: dict[tuple[ExperimentState, Event], ExperimentState] = {
    (S.CREATED, E.BUILD_REQUESTED): S.BUILDING,
    (S.BUILD_FAILED, E.BUILD_REQUESTED): S.BUILDING,
    (S.BUILDING, E.BUILD_SUCCEEDED): S.BUILT,
    (S.BUILDING, E.BUILD_FAILED): S.BUILD_FAILED,
    (S.BUILT, E.RUN_REQUESTED): S.RUNNING,
    (S.COMPLETED, E.RUN_REQUESTED): S.RUNNING,
    (S.RUN_FAILED, E.RUN_REQUESTED): S.RUNNING,
    (S.RUNNING, E.RUN_SUCCEEDED): S.COMPLETED,
    (S.RUNNING, E.RUN_FAILED): S.RUN_FAILED,
    (S.BUILT, E.BUILD_PARAMS_CHANGED): S.CREATED,
    (S.COMPLETED, E.BUILD_PARAMS_CHANGED): S.CREATED,
    (S.RUN_FAILED, E.BUILD_PARAMS_CHANGED): S.CREATED,
    (S.CREATED, E.RUN_PARAMS_CHANGED): S.CREATED,
    (S.BUILT, E.RUN_PARAMS_CHANGED): S.BUILT,
    (S.COMPLETED, E.RUN_PARAMS_CHANGED): S.COMPLETED,
    (S.RUN_FAILED, E.RUN_PARAMS_CHANGED): S.RUN_FAILED,
    (S.CREATED, E.ARCHIVE_REQUESTED): S.ARCHIVED,
    (S.BUILT, E.ARCHIVE_REQUESTED): S.ARCHIVED,
    (S.BUILD_FAILED, E.ARCHIVE_REQUESTED): S.ARCHIVED,
    (S.COMPLETED, E.ARCHIVE_REQUESTED): S.ARCHIVED,
    (S.RUN_FAILED, E.ARCHIVE_REQUESTED): S.ARCHIVED,
}

# States in which the experiment is quiescent (no job in flight, not frozen)
# and may therefore be edited, archived or deleted.
QUIESCENT_STATES = frozenset(
    {S.CREATED, S.BUILT, S.BUILD_FAILED, S.COMPLETED, S.RUN_FAILED}
)
RESULT_STATES = frozenset({S.COMPLETED, S.RUN_FAILED})


def transition(state: ExperimentState, event: Event) -> ExperimentState:
    """Next state for (state, event), or IllegalTransitionError if not in the table."""
    try:
        return TRANSITIONS[(state, event)]
    except KeyError:
        raise IllegalTransitionError(state.value, event.value) from None


@dataclass
class JobRecord:
    """One build or run execution as observed through the compute interface."""

    job_id: str
    backend: str
    phase: str
    started_at: str
    ended_at: str | None = None
    exit: dict[str, Any] | None = None
    log_path: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "job_id": self.job_id,
            "backend": self.backend,
            "phase": self.phase,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "exit": self.exit,
            "log_path": self.log_path,
        }

    @staticmethod
    def from_json(doc: Mapping[str, Any]) -> "JobRecord":
        return JobRecord(
            job_id=doc["job_id"],
            backend=doc["backend"],
            phase=doc["phase"],
            started_at=doc["started_at"],
            ended_at=doc.get("ended_at"),
            exit=doc.get("exit"),
            log_path=doc.get("log_path"),
        )


@dataclass
class ArtifactRef:
    """Pointer to one stored result artifact."""

    name: str
    declared_type: str
    size: int
    stored_path: str

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "declared_type": self.declared_type,
            "size": self.size,
            "stored_path": self.stored_path,
        }

    @staticmethod
    def from_json(doc: Mapping[str, Any]) -> "ArtifactRef":
        return ArtifactRef(doc["name"], doc["declared_type"], doc["size"], doc["stored_path"])


@dataclass
class Experiment:
    """Mutable per-session record; all mutations go through the methods below.

    Callers are responsible for serializing concurrent mutations (the Runtime
    Manager holds one lock per experiment).
    """

    id: str
    creator: str
    created_at: str
    description: str
    system_name: str
    system_version: str
    cfg: sd.SysCfg
    sysdef_snapshot: sd.SysDef
    state: ExperimentState
    state_since: str
    uploads: dict[str, str] = field(default_factory=dict)
    build_record: JobRecord | None = None
    run_record: JobRecord | None = None
    results_index: dict[str, ArtifactRef] = field(default_factory=dict)
    last_message: str | None = None

    # -- lifecycle ---------------------------------------------------------

    def apply_event(self, event: Event) -> ExperimentState:
        new_state = transition(self.state, event)
        if new_state is not self.state:
            self.state_since = utc_now_iso()
        self.state = new_state
        return self.state

    def require_quiescent(self, event: Event) -> None:
        if self.state not in QUIESCENT_STATES:
            raise IllegalTransitionError(self.state.value, event.value)

    def set_parameters(self, sysdef: sd.SysDef, overrides: Mapping[str, Any]) -> None:
        """Apply overrides; a build-phase key invalidates the build.

        Falling back to CREATED clears job records and results. Edits are
        rejected while a job is in flight or after archiving.
        """
        if self.state not in QUIESCENT_STATES:
            raise IllegalTransitionError(self.state.value, "set_parameters")
        new_cfg = sd.apply_overrides(self.cfg, sysdef, overrides)
        phases = {sd.classify_param(sysdef, name).phase for name in overrides}
        self.cfg = new_cfg
        if sd.Phase.BUILD in phases:
            self._invalidate_build()
        elif overrides:
            self._note_run_params_changed()

    def record_upload(self, sysdef: sd.SysDef, name: str, stored_path: str) -> None:
        """Register an uploaded file parameter; counts as a parameter change."""
        if self.state not in QUIESCENT_STATES:
            raise IllegalTransitionError(self.state.value, "upload")
        spec = sysdef.param_spec(name)  # raises UnknownParameterError
        if spec.default.kind is not sd.ParamKind.FILE:
            raise NotAFileParameterError(name)
        self.uploads[name] = stored_path
        if spec.phase is sd.Phase.BUILD:
            self._invalidate_build()
        else:
            self._note_run_params_changed()

    def _invalidate_build(self) -> None:
        # From CREATED the experiment is already awaiting a build; from
        # BUILD_FAILED the previous failure is superseded by the new
        # configuration. Both land in CREATED without a table entry.
        if self.state in (S.BUILT, S.COMPLETED, S.RUN_FAILED):
            self.apply_event(E.BUILD_PARAMS_CHANGED)
        elif self.state is S.BUILD_FAILED:
            self.state = S.CREATED
            self.state_since = utc_now_iso()
        self.build_record = None
        self.run_record = None
        self.results_index = {}
        self.last_message = None

    def _note_run_params_changed(self) -> None:
        if self.state is S.BUILD_FAILED:
            return  # run params do not touch the failed build; state keeps its meaning
        self.apply_event(E.RUN_PARAMS_CHANGED)

    def start_build(self, record: JobRecord) -> None:
        self.apply_event(E.BUILD_REQUESTED)
        self.build_record = record
        self.last_message = None

    def finish_build(self, succeeded: bool, message: str | None = None) -> None:
        self.apply_event(E.BUILD_SUCCEEDED if succeeded else E.BUILD_FAILED)
        self.last_message = message

    def start_run(self, record: JobRecord) -> None:
        self.apply_event(E.RUN_REQUESTED)
        self.run_record = record
        self.last_message = None

    def finish_run(
        self,
        succeeded: bool,
        results: Mapping[str, ArtifactRef],
        message: str | None = None,
    ) -> None:
        """Apply the run outcome and replace the results index atomically."""
        self.apply_event(E.RUN_SUCCEEDED if succeeded else E.RUN_FAILED)
        self.results_index = dict(results)
        self.last_message = message

    def mark_archived(self) -> None:
        self.apply_event(E.ARCHIVE_REQUESTED)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "meta": {
                "creator": self.creator,
                "created_at": self.created_at,
                "description": self.description,
                "status": self.state.value,
            },
            "state_since": self.state_since,
            "system": {"name": self.system_name, "version": self.system_version},
            "sysdef": sd.sysdef_to_wire(self.sysdef_snapshot),
            "cfg": sd.syscfg_to_wire(self.cfg),
            "uploads": dict(self.uploads),
            "build_record": self.build_record.to_json() if self.build_record else None,
            "run_record": self.run_record.to_json() if self.run_record else None,
            "results_index": {n: a.to_json() for n, a in self.results_index.items()},
            "last_message": self.last_message,
        }

    @staticmethod
    def from_json(doc: Mapping[str, Any]) -> "Experiment":
        meta = doc["meta"]
        return Experiment(
            id=doc["id"],
            creator=meta["creator"],
            created_at=meta["created_at"],
            description=meta.get("description") or "",
            system_name=doc["system"]["name"],
            system_version=doc["system"]["version"],
            cfg=sd.syscfg_from_wire(doc["cfg"]),
            sysdef_snapshot=sd.parse_sysdef(sd.canonical_json(doc["sysdef"])),
            state=ExperimentState(meta["status"]),
            state_since=doc["state_since"],
            uploads=dict(doc.get("uploads", {})),
            build_record=JobRecord.from_json(doc["build_record"]) if doc.get("build_record") else None,
            run_record=JobRecord.from_json(doc["run_record"]) if doc.get("run_record") else None,
            results_index={
                n: ArtifactRef.from_json(a) for n, a in doc.get("results_index", {}).items()
            },
            last_message=doc.get("last_message"),
        )


def create_experiment(
    cfg: sd.SysCfg,
    sysdef: sd.SysDef,
    creator: str,
    description: str = "",
) -> Experiment:
    """New experiment with a fresh UUID.

    Starts in CREATED when the system has a build step, BUILT otherwise.
    """
    problems = sd.check_against(cfg, sysdef)
    if problems:
        raise CfgMismatchError("; ".join(str(p) for p in problems))
    now = utc_now_iso()
    return Experiment(
        id=new_experiment_id(),
        creator=creator,
        created_at=now,
        description=description,
        system_name=sysdef.name,
        system_version=sysdef.version,
        cfg=cfg,
        sysdef_snapshot=sysdef,
        state=S.CREATED if sysdef.has_build_step else S.BUILT,
        state_since=now,
    )
