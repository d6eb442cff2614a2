"""Filesystem persistence: system catalog, experiments, artifacts, archives.

Layout under the data directory:

    experiments/<uuid>/experiment.json   one JSON document per experiment
    experiments/<uuid>/workspace/        uploads (params/) and syscfg.json
    experiments/<uuid>/artifacts/        stored result artifacts, verbatim
    experiments/<uuid>/logs/             job logs
    archive/<uuid>.zip                   frozen archive bundles

Experiment documents are written atomically (temp file + rename) so a crash
never corrupts the previous version.
"""
from __future__ import annotations

import json
import os
import shutil
import zipfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import sysdef as sd
from .errors import (
    ArchiveExistsError,
    CatalogRootMissingError,
    StorageFailure,
    SunriseError,
    UndeclaredResultError,
    UnknownExperimentError,
)
from .experiment import ArtifactRef, Experiment


@dataclass(frozen=True)
class SystemCatalogEntry:
    sysdef: sd.SysDef
    source: str
    loaded_at: str


@dataclass(frozen=True)
class CatalogIssue:
    source: str
    reason: str


@dataclass(frozen=True)
class CatalogSnapshot:
    entries: tuple[SystemCatalogEntry, ...]
    issues: tuple[CatalogIssue, ...]

    def find(self, name: str, version: str) -> sd.SysDef | None:
        for entry in self.entries:
            if entry.sysdef.identity == (name, version):
                return entry.sysdef
        return None


def load_catalog(root: str | Path) -> CatalogSnapshot:
    """Parse every *.json under ``root`` into catalog entries.

    Invalid files and duplicate (name, version) pairs are reported as issues,
    not errors; on duplicates the lexicographically first path wins. Entries
    come back sorted by (name, version).
    """
    root = Path(root)
    if not root.is_dir():
        raise CatalogRootMissingError(f"catalog root {str(root)!r} does not exist")
    loaded_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    entries: dict[tuple[str, str], SystemCatalogEntry] = {}
    issues: list[CatalogIssue] = []
    for path in sorted(root.rglob("*.json")):
        try:
            sysdef = sd.parse_sysdef(path.read_text(encoding="utf-8"))
        except (SunriseError, OSError, UnicodeDecodeError) as exc:
            issues.append(CatalogIssue(str(path), f"invalid SysDef: {exc}"))
            continue
        if sysdef.identity in entries:
            issues.append(
                CatalogIssue(str(path), f"duplicate system {sysdef.identity}; first file wins")
            )
            continue
        entries[sysdef.identity] = SystemCatalogEntry(sysdef, str(path), loaded_at)
    ordered = tuple(entries[key] for key in sorted(entries))
    return CatalogSnapshot(entries=ordered, issues=tuple(issues))


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageFailure(f"failed to write {path}: {exc}") from exc
    finally:
        tmp.unlink(missing_ok=True)


class ExperimentStore:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        (self.data_dir / "experiments").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "archive").mkdir(parents=True, exist_ok=True)

    # -- paths ---------------------------------------------------------------

    def experiment_dir(self, exp_id: str) -> Path:
        return self.data_dir / "experiments" / exp_id

    def workspace_dir(self, exp_id: str) -> Path:
        return self.experiment_dir(exp_id) / "workspace"

    def artifacts_dir(self, exp_id: str) -> Path:
        return self.experiment_dir(exp_id) / "artifacts"

    def logs_dir(self, exp_id: str) -> Path:
        return self.experiment_dir(exp_id) / "logs"

    def archive_path(self, exp_id: str) -> Path:
        return self.data_dir / "archive" / f"{exp_id}.zip"

    # -- experiment documents ---------------------------------------------------

    def persist_experiment(self, exp: Experiment) -> None:
        doc = sd.canonical_json(exp.to_json())
        atomic_write(self.experiment_dir(exp.id) / "experiment.json", doc)

    def load_experiment(self, exp_id: str) -> Experiment:
        path = self.experiment_dir(exp_id) / "experiment.json"
        if not path.is_file():
            raise UnknownExperimentError(f"unknown experiment {exp_id!r}")
        try:
            return Experiment.from_json(json.loads(path.read_text(encoding="utf-8")))
        except (ValueError, KeyError) as exc:
            raise StorageFailure(f"corrupt experiment document {path}: {exc}") from exc

    def experiment_bytes(self, exp_id: str) -> bytes:
        path = self.experiment_dir(exp_id) / "experiment.json"
        if not path.is_file():
            raise UnknownExperimentError(f"unknown experiment {exp_id!r}")
        return path.read_bytes()

    def list_experiment_ids(self) -> list[str]:
        root = self.data_dir / "experiments"
        return sorted(
            p.name for p in root.iterdir() if (p / "experiment.json").is_file()
        )

    def delete_experiment(self, exp_id: str) -> None:
        path = self.experiment_dir(exp_id)
        if not path.exists():
            raise UnknownExperimentError(f"unknown experiment {exp_id!r}")
        shutil.rmtree(path)

    # -- uploads and workspace ---------------------------------------------------

    def save_upload(self, exp_id: str, param: str, content: bytes) -> str:
        """Persist an uploaded file parameter; returns the workspace-relative path."""
        rel = f"params/{param}"
        atomic_write(self.workspace_dir(exp_id) / rel, content)
        return rel

    def write_syscfg(self, exp_id: str, document: bytes) -> Path:
        path = self.workspace_dir(exp_id) / "syscfg.json"
        atomic_write(path, document)
        return path

    def read_syscfg(self, exp_id: str) -> bytes | None:
        path = self.workspace_dir(exp_id) / "syscfg.json"
        return path.read_bytes() if path.is_file() else None

    # -- artifacts ----------------------------------------------------------------

    def store_artifact(self, exp: Experiment, name: str, content: bytes) -> ArtifactRef:
        spec = exp.sysdef_snapshot.results.get(name)
        if spec is None:
            raise UndeclaredResultError(f"result {name!r} is not declared by the system")
        rel = f"artifacts/{name}"
        atomic_write(self.experiment_dir(exp.id) / rel, content)
        return ArtifactRef(name=name, declared_type=spec.type, size=len(content), stored_path=rel)

    def artifact_file(self, exp_id: str, ref: ArtifactRef) -> Path:
        return self.experiment_dir(exp_id) / ref.stored_path

    def get_artifact(self, exp_id: str, ref: ArtifactRef) -> bytes:
        return self.artifact_file(exp_id, ref).read_bytes()

    def store_log(self, exp_id: str, filename: str, text: str) -> str:
        rel = f"logs/{filename}"
        atomic_write(self.experiment_dir(exp_id) / rel, text.encode())
        return rel

    def read_log(self, exp_id: str, rel: str) -> str:
        path = self.experiment_dir(exp_id) / rel
        return path.read_text(errors="replace") if path.is_file() else ""

    # -- archive bundles --------------------------------------------------------------

    def write_archive(self, exp: Experiment, syscfg_doc: dict[str, Any]) -> Path:
        """Freeze the experiment into <data_dir>/archive/<uuid>.zip.

        The manifest embeds the materialized SysCfg of the last executed
        configuration; results, uploaded parameter files and logs travel in
        their own directories.
        """
        target = self.archive_path(exp.id)
        if target.exists():
            raise ArchiveExistsError(f"archive for experiment {exp.id} already exists")
        jobs = [r.to_json() for r in (exp.build_record, exp.run_record) if r is not None]
        manifest = {
            "experiment": {
                "id": exp.id,
                "creator": exp.creator,
                "created_at": exp.created_at,
                "description": exp.description,
                "status": exp.state.value,
            },
            "system": sd.sysdef_to_wire(exp.sysdef_snapshot),
            "syscfg": syscfg_doc,
            "jobs": jobs,
            "results": [ref.to_json() for ref in exp.results_index.values()],
        }
        tmp = target.with_name(target.name + ".tmp")
        try:
            with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as bundle:
                bundle.writestr("manifest.json", sd.canonical_json(manifest))
                for directory in ("results/", "params/", "logs/"):
                    bundle.writestr(zipfile.ZipInfo(directory), b"")
                for name, ref in sorted(exp.results_index.items()):
                    bundle.write(self.artifact_file(exp.id, ref), f"results/{name}")
                for name, rel in sorted(exp.uploads.items()):
                    source = self.workspace_dir(exp.id) / rel
                    if source.is_file():
                        bundle.write(source, f"params/{name}")
                logs_root = self.logs_dir(exp.id)
                if logs_root.is_dir():
                    for log_file in sorted(logs_root.iterdir()):
                        if log_file.is_file():
                            bundle.write(log_file, f"logs/{log_file.name}")
            os.replace(tmp, target)
        except OSError as exc:
            raise StorageFailure(f"failed to write archive {target}: {exc}") from exc
        finally:
            tmp.unlink(missing_ok=True)
        return target
