"""Exception hierarchy shared across the Runtime Manager.

Every error carries a machine-readable ``code`` so the REST layer can map
domain failures onto the wire format without inspecting exception types at
each call site.
"""
from __future__ import annotations

# Closed set of machine-readable error codes used on the wire.
ERROR_CODES = frozenset(
    {
        "unknown_system",
        "unknown_experiment",
        "unknown_parameter",
        "not_a_file_parameter",
        "kind_mismatch",
        "illegal_state",
        "unknown_result",
        "backend_unavailable",
        "timeout",
        "validation_failed",
        "unauthorized",
        "internal",
    }
)


class SunriseError(Exception):
    """Base class for all domain errors."""

    code = "internal"
    http_status = 500

    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class UnauthorizedError(SunriseError):
    code = "unauthorized"
    http_status = 401


class SysDefSyntaxError(SunriseError):
    """The SysDef document is not valid JSON."""

    code = "validation_failed"
    http_status = 422


class SchemaError(SunriseError):
    """The document is valid JSON but violates the SysDef/SysCfg schema."""

    code = "validation_failed"
    http_status = 422


class UnknownSystemError(SunriseError):
    code = "unknown_system"
    http_status = 404


class UnknownExperimentError(SunriseError):
    code = "unknown_experiment"
    http_status = 404


class UnknownParameterError(SunriseError):
    code = "unknown_parameter"
    http_status = 404

    def __init__(self, name: str):
        super().__init__(f"unknown parameter: {name!r}", {"parameter": name})
        self.name = name


class KindMismatchError(SunriseError):
    code = "kind_mismatch"
    http_status = 422

    def __init__(self, name: str, expected: str, got: str):
        super().__init__(
            f"parameter {name!r} expects {expected}, got {got}",
            {"parameter": name, "expected": expected, "got": got},
        )
        self.name = name
        self.expected = expected
        self.got = got


class FileParamInlineValueError(SunriseError):
    """A file parameter was given inline content instead of a file reference."""

    code = "not_a_file_parameter"
    http_status = 422

    def __init__(self, name: str):
        super().__init__(
            f"parameter {name!r} is file-typed; upload the file instead of "
            "assigning an inline value",
            {"parameter": name},
        )
        self.name = name


class NotAFileParameterError(SunriseError):
    code = "not_a_file_parameter"
    http_status = 422

    def __init__(self, name: str):
        super().__init__(f"parameter {name!r} is not file-typed", {"parameter": name})
        self.name = name


class MissingUploadError(SunriseError):
    code = "validation_failed"
    http_status = 422

    def __init__(self, name: str):
        super().__init__(f"file parameter {name!r} has no staged file", {"parameter": name})
        self.name = name


class IllegalTransitionError(SunriseError):
    code = "illegal_state"
    http_status = 409

    def __init__(self, state: str, event: str, message: str | None = None):
        super().__init__(
            message or f"event {event!r} is not legal in state {state!r}",
            {"state": state, "event": event},
        )
        self.state = state
        self.event = event


class CfgMismatchError(SunriseError):
    code = "validation_failed"
    http_status = 422


class UnknownResultError(SunriseError):
    code = "unknown_result"
    http_status = 404

    def __init__(self, name: str, declared: bool = False):
        if declared:
            msg = f"result {name!r} is declared but was not produced by the run"
            detail = {"result": name, "declared": True, "artifact_missing": True}
        else:
            msg = f"result {name!r} is not declared by the system"
            detail = {"result": name, "declared": False}
        super().__init__(msg, detail)
        self.name = name
        self.declared = declared


class UndeclaredResultError(SunriseError):
    code = "unknown_result"
    http_status = 404


class BackendUnreachableError(SunriseError):
    code = "backend_unavailable"
    http_status = 503


class NoBackendAvailableError(SunriseError):
    code = "backend_unavailable"
    http_status = 503


class StageInFailure(SunriseError):
    code = "backend_unavailable"
    http_status = 503

    def __init__(self, path: str, reason: str = ""):
        super().__init__(f"failed to stage {path!r} into the job workspace: {reason}", {"path": path})
        self.path = path


class UnknownJobError(SunriseError):
    code = "internal"
    http_status = 500


class JobNotTerminalError(SunriseError):
    code = "illegal_state"
    http_status = 409


class ArtifactNotFoundError(SunriseError):
    code = "unknown_result"
    http_status = 404

    def __init__(self, path: str):
        super().__init__(f"artifact {path!r} not found in job workspace", {"path": path})
        self.path = path


class StorageFailure(SunriseError):
    code = "internal"
    http_status = 500


class CatalogRootMissingError(SunriseError):
    code = "internal"
    http_status = 500


class ArchiveExistsError(SunriseError):
    code = "illegal_state"
    http_status = 409
