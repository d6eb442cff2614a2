"""System Definition (SysDef) and System Configuration (SysCfg) documents.

A SysDef describes a containerized system: identity, image reference, build
and run commands, typed parameters with defaults, and declared result
artifacts. A SysCfg is a concrete assignment of values to every parameter of
one SysDef. Both have a fixed JSON wire format; all types here are immutable
and all operations are pure.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping

from .errors import (
    FileParamInlineValueError,
    KindMismatchError,
    MissingUploadError,
    SchemaError,
    SysDefSyntaxError,
    UnknownParameterError,
)

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")

# Top-level JSON keys accepted in a SysDef document. The image reference is
# serialized under "docker_image" for interchange compatibility.
_SYSDEF_KEYS = {
    "name",
    "version",
    "documentation",
    "docker_image",
    "build_command",
    "run_command",
    "build_parameters",
    "run_parameters",
    "results",
}
_DOC_KEYS = {"contact", "summary", "description"}
_RESULT_KEYS = {"path", "type"}
_FILE_VALUE_KEYS = {"value", "is_file"}


def canonical_json(obj: Any) -> bytes:
    """Serialize ``obj`` deterministically: sorted keys, UTF-8, LF, 2-space indent."""
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


class ParamKind(str, Enum):
    TEXT = "text"
    NUMBER = "number"
    FLAG = "flag"
    FILE = "file"


class Phase(str, Enum):
    BUILD = "build"
    RUN = "run"


@dataclass(frozen=True, eq=True)
class ParamValue:
    """One typed parameter value.

    ``value`` holds a str (text), int/float (number), bool (flag) or the
    path-or-token string of a file reference (file).
    """

    kind: ParamKind
    value: str | int | float | bool

    @staticmethod
    def text(value: str) -> "ParamValue":
        return ParamValue(ParamKind.TEXT, value)

    @staticmethod
    def number(value: int | float) -> "ParamValue":
        return ParamValue(ParamKind.NUMBER, value)

    @staticmethod
    def flag(value: bool) -> "ParamValue":
        return ParamValue(ParamKind.FLAG, value)

    @staticmethod
    def file(value: str) -> "ParamValue":
        return ParamValue(ParamKind.FILE, value)

    def to_json(self) -> Any:
        if self.kind is ParamKind.FILE:
            return {"value": self.value, "is_file": True}
        return self.value

    @staticmethod
    def from_json(raw: Any, where: str = "parameter") -> "ParamValue":
        # bool must be tested before int: bool is an int subclass.
        if isinstance(raw, bool):
            return ParamValue.flag(raw)
        if isinstance(raw, (int, float)):
            return ParamValue.number(raw)
        if isinstance(raw, str):
            return ParamValue.text(raw)
        if isinstance(raw, dict):
            if set(raw) != _FILE_VALUE_KEYS:
                raise SchemaError(
                    f"{where}: file value must have exactly keys 'value' and 'is_file', got {sorted(raw)}"
                )
            if raw["is_file"] is not True:
                raise SchemaError(f"{where}: 'is_file' must be true on file values")
            if not isinstance(raw["value"], str):
                raise SchemaError(f"{where}: file value path must be a string")
            return ParamValue.file(raw["value"])
        raise SchemaError(f"{where}: unsupported value kind {type(raw).__name__}")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    phase: Phase
    default: ParamValue


@dataclass(frozen=True)
class ResultSpec:
    name: str
    path: str
    type: str


@dataclass(frozen=True)
class Documentation:
    contact: str = ""
    summary: str = ""
    description: str = ""


@dataclass(frozen=True, eq=True)
class SysDef:
    """Immutable description of one system; (name, version) is its identity."""

    name: str
    version: str
    image_ref: str
    run_command: str
    build_command: str | None = None
    documentation: Documentation = Documentation()
    build_parameters: dict[str, ParamSpec] = field(default_factory=dict)
    run_parameters: dict[str, ParamSpec] = field(default_factory=dict)
    results: dict[str, ResultSpec] = field(default_factory=dict)

    @property
    def identity(self) -> tuple[str, str]:
        return (self.name, self.version)

    @property
    def has_build_step(self) -> bool:
        return self.build_command is not None

    def parameters(self) -> Iterator[ParamSpec]:
        yield from self.build_parameters.values()
        yield from self.run_parameters.values()

    def param_spec(self, name: str) -> ParamSpec:
        spec = self.build_parameters.get(name) or self.run_parameters.get(name)
        if spec is None:
            raise UnknownParameterError(name)
        return spec

    def file_parameter_names(self) -> list[str]:
        return [p.name for p in self.parameters() if p.default.kind is ParamKind.FILE]


@dataclass(frozen=True, eq=True)
class SysCfg:
    """Concrete parameter assignment for one SysDef."""

    system_name: str
    system_version: str
    build_parameters: dict[str, ParamValue] = field(default_factory=dict)
    run_parameters: dict[str, ParamValue] = field(default_factory=dict)

    def value_of(self, name: str) -> ParamValue:
        if name in self.build_parameters:
            return self.build_parameters[name]
        if name in self.run_parameters:
            return self.run_parameters[name]
        raise UnknownParameterError(name)

    def file_parameters(self) -> dict[str, ParamValue]:
        out = {}
        for params in (self.build_parameters, self.run_parameters):
            for name, value in params.items():
                if value.kind is ParamKind.FILE:
                    out[name] = value
        return out


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class ParamInfo:
    phase: Phase
    kind: ParamKind


def _reject_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict:
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise SchemaError(f"duplicate key {key!r} in JSON object")
        seen[key] = value
    return seen


def _require_str(doc: Mapping[str, Any], key: str, where: str) -> str:
    if key not in doc:
        raise SchemaError(f"{where}: missing required key {key!r}")
    value = doc[key]
    if not isinstance(value, str):
        raise SchemaError(f"{where}: {key!r} must be a string")
    return value


def _parse_params(raw: Any, phase: Phase, where: str) -> dict[str, ParamSpec]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise SchemaError(f"{where} must be a JSON object")
    specs: dict[str, ParamSpec] = {}
    for name, value in raw.items():
        if not IDENTIFIER_RE.match(name):
            raise SchemaError(f"{where}: {name!r} is not a valid parameter identifier")
        specs[name] = ParamSpec(name, phase, ParamValue.from_json(value, f"{where}.{name}"))
    return specs


def _parse_results(raw: Any) -> dict[str, ResultSpec]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise SchemaError("results must be a JSON object")
    results: dict[str, ResultSpec] = {}
    for name, entry in raw.items():
        if not IDENTIFIER_RE.match(name):
            raise SchemaError(f"results: {name!r} is not a valid result identifier")
        if not isinstance(entry, dict):
            raise SchemaError(f"results.{name} must be a JSON object")
        if set(entry) != _RESULT_KEYS:
            raise SchemaError(
                f"results.{name}: expected exactly keys 'path' and 'type', got {sorted(entry)}"
            )
        path = entry["path"]
        type_tag = entry["type"]
        if not isinstance(path, str) or not isinstance(type_tag, str):
            raise SchemaError(f"results.{name}: 'path' and 'type' must be strings")
        results[name] = ResultSpec(name, path, type_tag)
    return results


def _path_violation(path: str) -> str | None:
    if not path:
        return "must be non-empty"
    if path.startswith("/") or path.startswith("\\"):
        return "must be workspace-relative (no leading separator)"
    if ".." in path.replace("\\", "/").split("/"):
        return "must not contain '..' traversal segments"
    return None


def parse_sysdef(text: str | bytes) -> SysDef:
    """Parse a SysDef JSON document.

    Strict mode: unknown keys, duplicate keys, wrong value kinds and invalid
    result paths are rejected with SchemaError; malformed JSON raises
    SysDefSyntaxError.
    """
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise SysDefSyntaxError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("SysDef document must be a JSON object")

    unknown = set(doc) - _SYSDEF_KEYS
    if unknown:
        raise SchemaError(f"unknown top-level keys: {sorted(unknown)}")

    name = _require_str(doc, "name", "SysDef")
    version = _require_str(doc, "version", "SysDef")
    image_ref = _require_str(doc, "docker_image", "SysDef")
    run_command = _require_str(doc, "run_command", "SysDef")

    build_command = doc.get("build_command")
    if build_command is not None and not isinstance(build_command, str):
        raise SchemaError("SysDef: 'build_command' must be a string")

    documentation = Documentation()
    if "documentation" in doc:
        raw_doc = doc["documentation"]
        if not isinstance(raw_doc, dict):
            raise SchemaError("SysDef: 'documentation' must be a JSON object")
        unknown = set(raw_doc) - _DOC_KEYS
        if unknown:
            raise SchemaError(f"documentation: unknown keys {sorted(unknown)}")
        for key, value in raw_doc.items():
            if not isinstance(value, str):
                raise SchemaError(f"documentation.{key} must be a string")
        documentation = Documentation(
            contact=raw_doc.get("contact", ""),
            summary=raw_doc.get("summary", ""),
            description=raw_doc.get("description", ""),
        )

    sysdef = SysDef(
        name=name,
        version=version,
        image_ref=image_ref,
        run_command=run_command,
        build_command=build_command,
        documentation=documentation,
        build_parameters=_parse_params(doc.get("build_parameters"), Phase.BUILD, "build_parameters"),
        run_parameters=_parse_params(doc.get("run_parameters"), Phase.RUN, "run_parameters"),
        results=_parse_results(doc.get("results")),
    )

    violations = validate_sysdef(sysdef)
    if violations:
        raise SchemaError("; ".join(str(v) for v in violations), {"violations": [str(v) for v in violations]})
    return sysdef


def sysdef_to_wire(sysdef: SysDef) -> dict[str, Any]:
    """Wire-format dict of a SysDef (JSON keys mirroring the document schema)."""
    doc: dict[str, Any] = {
        "name": sysdef.name,
        "version": sysdef.version,
        "documentation": {
            "contact": sysdef.documentation.contact,
            "summary": sysdef.documentation.summary,
            "description": sysdef.documentation.description,
        },
        "docker_image": sysdef.image_ref,
        "run_command": sysdef.run_command,
        "build_parameters": {n: s.default.to_json() for n, s in sysdef.build_parameters.items()},
        "run_parameters": {n: s.default.to_json() for n, s in sysdef.run_parameters.items()},
        "results": {n: {"path": r.path, "type": r.type} for n, r in sysdef.results.items()},
    }
    if sysdef.build_command is not None:
        doc["build_command"] = sysdef.build_command
    return doc


def serialize_sysdef(sysdef: SysDef) -> bytes:
    return canonical_json(sysdef_to_wire(sysdef))


def validate_sysdef(sysdef: SysDef) -> list[Violation]:
    """Check every SysDef invariant; an empty list means the value is valid."""
    violations: list[Violation] = []
    for fname in ("name", "version", "run_command", "image_ref"):
        if not getattr(sysdef, fname):
            violations.append(Violation(fname, "must be non-empty"))
    if sysdef.build_command is not None and not sysdef.build_command:
        violations.append(Violation("build_command", "must be non-empty when present"))
    if sysdef.build_command is None and sysdef.build_parameters:
        violations.append(
            Violation("build_parameters", "must be empty when the system has no build step")
        )

    dupes = set(sysdef.build_parameters) & set(sysdef.run_parameters)
    for name in sorted(dupes):
        violations.append(Violation(f"parameters.{name}", "duplicate parameter name across build and run"))

    for mapping, phase in ((sysdef.build_parameters, Phase.BUILD), (sysdef.run_parameters, Phase.RUN)):
        for name, spec in mapping.items():
            if not IDENTIFIER_RE.match(name):
                violations.append(Violation(f"parameters.{name}", "invalid identifier"))
            if spec.name != name:
                violations.append(Violation(f"parameters.{name}", "spec name differs from its key"))
            if spec.phase is not phase:
                violations.append(Violation(f"parameters.{name}", f"phase must be {phase.value}"))

    for name, result in sysdef.results.items():
        if not IDENTIFIER_RE.match(name):
            violations.append(Violation(f"results.{name}", "invalid identifier"))
        rule = _path_violation(result.path)
        if rule is not None:
            violations.append(Violation(f"results.{name}.path", rule))
        if not result.type:
            violations.append(Violation(f"results.{name}.type", "must be non-empty"))
    return violations


def derive_syscfg(sysdef: SysDef) -> SysCfg:
    """SysCfg populated with every parameter's default value."""
    return SysCfg(
        system_name=sysdef.name,
        system_version=sysdef.version,
        build_parameters={n: s.default for n, s in sysdef.build_parameters.items()},
        run_parameters={n: s.default for n, s in sysdef.run_parameters.items()},
    )


def _coerce_override(spec: ParamSpec, raw: Any) -> ParamValue:
    expected = spec.default.kind
    if isinstance(raw, ParamValue):
        got = raw.kind
        if expected is ParamKind.FILE and got is not ParamKind.FILE:
            raise FileParamInlineValueError(spec.name)
        if got is not expected:
            raise KindMismatchError(spec.name, expected.value, got.value)
        return raw
    if expected is ParamKind.FILE:
        # Only a file descriptor (upload token) may override a file parameter.
        if isinstance(raw, dict) and raw.get("is_file") is True:
            return ParamValue.from_json(raw, spec.name)
        raise FileParamInlineValueError(spec.name)
    value = ParamValue.from_json(raw, spec.name)
    if value.kind is not expected:
        raise KindMismatchError(spec.name, expected.value, value.kind.value)
    return value


def apply_overrides(cfg: SysCfg, sysdef: SysDef, overrides: Mapping[str, Any]) -> SysCfg:
    """Return ``cfg`` with ``overrides`` applied; untouched keys keep their values.

    Override values may be ParamValue instances or raw JSON values. File
    parameters accept only file descriptors, never inline content.
    """
    build = dict(cfg.build_parameters)
    run = dict(cfg.run_parameters)
    for name, raw in overrides.items():
        if name in build:
            build[name] = _coerce_override(sysdef.build_parameters[name], raw)
        elif name in run:
            run[name] = _coerce_override(sysdef.run_parameters[name], raw)
        else:
            raise UnknownParameterError(name)
    return SysCfg(cfg.system_name, cfg.system_version, build, run)


def classify_param(sysdef: SysDef, name: str) -> ParamInfo:
    spec = sysdef.param_spec(name)
    return ParamInfo(phase=spec.phase, kind=spec.default.kind)


def syscfg_to_wire(cfg: SysCfg, staged_files: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Wire-format dict of a SysCfg.

    With ``staged_files`` given, every file parameter must have a staged
    workspace path and its value is rewritten to that path.
    """

    def params_out(params: Mapping[str, ParamValue]) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name, value in params.items():
            if value.kind is ParamKind.FILE and staged_files is not None:
                if name not in staged_files:
                    raise MissingUploadError(name)
                out[name] = ParamValue.file(staged_files[name]).to_json()
            else:
                out[name] = value.to_json()
        return out

    return {
        "system": {"name": cfg.system_name, "version": cfg.system_version},
        "build_parameters": params_out(cfg.build_parameters),
        "run_parameters": params_out(cfg.run_parameters),
    }


def materialize_syscfg(cfg: SysCfg, staged_files: Mapping[str, str]) -> bytes:
    """Canonical syscfg.json bytes with file values rewritten to staged paths."""
    return canonical_json(syscfg_to_wire(cfg, staged_files))


def syscfg_from_wire(doc: Mapping[str, Any]) -> SysCfg:
    """Rebuild a SysCfg from its wire form (trusted storage, no SysDef check)."""
    if not isinstance(doc, Mapping):
        raise SchemaError("SysCfg document must be a JSON object")
    system = doc.get("system")
    if not isinstance(system, Mapping) or "name" not in system or "version" not in system:
        raise SchemaError("SysCfg: 'system' must carry 'name' and 'version'")

    def params_in(key: str) -> dict[str, ParamValue]:
        raw = doc.get(key, {})
        if not isinstance(raw, Mapping):
            raise SchemaError(f"SysCfg: {key!r} must be a JSON object")
        return {n: ParamValue.from_json(v, f"{key}.{n}") for n, v in raw.items()}

    return SysCfg(
        system_name=system["name"],
        system_version=system["version"],
        build_parameters=params_in("build_parameters"),
        run_parameters=params_in("run_parameters"),
    )


def check_against(cfg: SysCfg, sysdef: SysDef) -> list[Violation]:
    """Key-set and kind consistency of a SysCfg against its SysDef."""
    violations: list[Violation] = []
    if (cfg.system_name, cfg.system_version) != sysdef.identity:
        violations.append(Violation("system", "identity differs from the SysDef"))
    for attr, specs in (
        ("build_parameters", sysdef.build_parameters),
        ("run_parameters", sysdef.run_parameters),
    ):
        values: Mapping[str, ParamValue] = getattr(cfg, attr)
        missing = set(specs) - set(values)
        extra = set(values) - set(specs)
        for name in sorted(missing):
            violations.append(Violation(f"{attr}.{name}", "missing assignment"))
        for name in sorted(extra):
            violations.append(Violation(f"{attr}.{name}", "not declared by the SysDef"))
        for name in sorted(set(specs) & set(values)):
            if values[name].kind is not specs[name].default.kind:
                violations.append(
                    Violation(
                        f"{attr}.{name}",
                        f"kind must be {specs[name].default.kind.value}, got {values[name].kind.value}",
                    )
                )
    return violations
