"""Canonical data model: repository snapshots, requirements, serialization.

A snapshot is an immutable value describing one repository revision:
source files, the code components declared in them, and component-level
dependency edges. Requirements exist at two levels: implementation-level
(one per component or file) and user-level (one or more per file
community, rendered as six-field use cases).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import SnapshotParseError, SnapshotValidationError

SCHEMA_VERSION = 1

KIND_CLASS = "class"
KIND_INTERFACE = "interface"
KIND_ENUM = "enum_decl"
KIND_METHOD = "method"
KIND_FUNCTION = "function"

LANGUAGES = ("java", "python")

# Permitted component kinds per source language.
JAVA_KINDS = frozenset({KIND_CLASS, KIND_INTERFACE, KIND_ENUM, KIND_METHOD})
PYTHON_KINDS = frozenset({KIND_CLASS, KIND_FUNCTION, KIND_METHOD})
KINDS_BY_LANGUAGE = {"java": JAVA_KINDS, "python": PYTHON_KINDS}

IR_LEVELS = ("component", "file")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def content_hash(data: bytes) -> str:
    """Deterministic 64-hex digest (SHA-256) of a byte sequence."""
    return hashlib.sha256(data).hexdigest()


def component_id(file_path: str, qualified_name: str) -> str:
    """Canonical component id: ``<file_path>::<qualified.name>``."""
    return f"{file_path}::{qualified_name}"


@dataclass(frozen=True)
class Component:
    """One declared code unit (class, interface, enum, method, function)."""

    id: str
    kind: str
    file_path: str
    depends_on: tuple[str, ...]
    source_code: str
    line_span: tuple[int, int]

    @property
    def qualified_name(self) -> str:
        return self.id.split("::", 1)[1] if "::" in self.id else self.id


@dataclass(frozen=True)
class SourceFile:
    """One source file of a snapshot; component_ids list its declarations."""

    path: str
    language: str
    content_hash: str
    component_ids: tuple[str, ...]


@dataclass(frozen=True)
class RepositorySnapshot:
    """Parsed files, components, and dependency edges of one revision.

    ``created_at`` is bookkeeping only and excluded from equality, so
    structurally identical snapshots compare equal across runs.
    """

    repo_root: str
    revision_label: str
    files: tuple[SourceFile, ...]
    components: tuple[Component, ...]
    created_at: str = field(compare=False, default_factory=utc_now_iso)

    def component_map(self) -> dict[str, Component]:
        return {c.id: c for c in self.components}

    def file_map(self) -> dict[str, SourceFile]:
        return {f.path: f for f in self.files}


@dataclass(frozen=True)
class ImplementationRequirement:
    """Developer-oriented description of one component or file.

    ``context_ids`` records which artifacts' requirement texts were fed
    to the backend as context when this text was produced.
    """

    target_id: str
    level: str
    text: str
    context_ids: tuple[str, ...]
    model_id: str
    prompt_hash: str
    stale: bool = False


@dataclass(frozen=True)
class UserRequirement:
    """Use-case-shaped user-level requirement anchored to a file community."""

    ur_id: str
    name: str
    actors: tuple[str, ...]
    description: str
    preconditions: tuple[str, ...]
    event_flow: tuple[str, ...]
    exit_conditions: tuple[str, ...]
    business_rules: tuple[str, ...]
    community_id: int
    source_file_paths: tuple[str, ...]
    stale: bool = False

    def use_case_fields(self) -> dict[str, object]:
        """The six use-case attributes, in presentation order."""
        return {
            "name": self.name,
            "actors": self.actors,
            "description": self.description,
            "preconditions": self.preconditions,
            "event_flow": self.event_flow,
            "exit_conditions": self.exit_conditions,
        }


# ---------------------------------------------------------------------------
# validation


def validate_snapshot(snapshot: RepositorySnapshot) -> list[str]:
    """Check every structural invariant; return one diagnostic per violation."""
    violations: list[str] = []
    comp_ids = [c.id for c in snapshot.components]
    comp_id_set = set(comp_ids)
    file_paths = [f.path for f in snapshot.files]
    file_by_path = {f.path: f for f in snapshot.files}

    seen = set()
    for cid in comp_ids:
        if cid in seen:
            violations.append(f"duplicate component id: {cid}")
        seen.add(cid)
    seen = set()
    for p in file_paths:
        if p in seen:
            violations.append(f"duplicate file path: {p}")
        seen.add(p)

    for f in snapshot.files:
        if f.language not in LANGUAGES:
            violations.append(f"file {f.path}: unknown language {f.language!r}")
        if len(f.content_hash) != 64 or any(ch not in "0123456789abcdef" for ch in f.content_hash):
            violations.append(f"file {f.path}: content_hash is not a 64-hex digest")
        for cid in f.component_ids:
            if cid not in comp_id_set:
                violations.append(f"file {f.path}: lists unknown component {cid}")
            else:
                comp = next(c for c in snapshot.components if c.id == cid)
                if comp.file_path != f.path:
                    violations.append(
                        f"file {f.path}: lists component {cid} whose file_path is {comp.file_path}"
                    )

    for c in snapshot.components:
        for dep in c.depends_on:
            if dep not in comp_id_set:
                violations.append(f"component {c.id}: dangling dependency on {dep}")
        start, end = c.line_span
        if start > end:
            violations.append(f"component {c.id}: line_span start {start} > end {end}")
        if start < 1:
            violations.append(f"component {c.id}: line_span start {start} < 1")
        owner = file_by_path.get(c.file_path)
        if owner is None:
            violations.append(f"component {c.id}: file_path {c.file_path} not in snapshot")
        else:
            allowed = KINDS_BY_LANGUAGE.get(owner.language, frozenset())
            if c.kind not in allowed:
                violations.append(
                    f"component {c.id}: kind {c.kind!r} not permitted for {owner.language} files"
                )

    listed = set()
    for f in snapshot.files:
        listed.update(f.component_ids)
    for cid in comp_id_set - listed:
        violations.append(f"component {cid}: not listed by any file")

    return violations


def validate_ir(ir: ImplementationRequirement) -> list[str]:
    violations = []
    if ir.level not in IR_LEVELS:
        violations.append(f"ir {ir.target_id}: unknown level {ir.level!r}")
    if ir.level == "component" and "::" not in ir.target_id:
        violations.append(f"ir {ir.target_id}: component-level target is not a component id")
    if ir.level == "file" and "::" in ir.target_id:
        violations.append(f"ir {ir.target_id}: file-level target is not a file path")
    if not ir.stale and not ir.text.strip():
        violations.append(f"ir {ir.target_id}: empty text on a non-stale requirement")
    return violations


def validate_ur(ur: UserRequirement) -> list[str]:
    violations = []
    if ur.stale:
        return violations
    for name, value in ur.use_case_fields().items():
        if isinstance(value, str):
            filled = bool(value.strip())
        else:
            filled = len(value) > 0 and all(str(v).strip() for v in value)
        if not filled:
            violations.append(f"ur {ur.ur_id}: use-case field {name!r} is empty")
    return violations


# ---------------------------------------------------------------------------
# snapshot serialization (single JSON document, stable key order)


def snapshot_to_dict(snapshot: RepositorySnapshot) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "repo_root": snapshot.repo_root,
        "revision_label": snapshot.revision_label,
        "created_at": snapshot.created_at,
        "files": [
            {
                "path": f.path,
                "language": f.language,
                "content_hash": f.content_hash,
                "component_ids": list(f.component_ids),
            }
            for f in snapshot.files
        ],
        "components": [
            {
                "id": c.id,
                "kind": c.kind,
                "file_path": c.file_path,
                "depends_on": list(c.depends_on),
                "source_code": c.source_code,
                "line_span": list(c.line_span),
            }
            for c in snapshot.components
        ],
    }


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SnapshotParseError(f"{where}: missing field {key!r}")
    return obj[key]


def snapshot_from_dict(doc: dict) -> RepositorySnapshot:
    if not isinstance(doc, dict):
        raise SnapshotParseError("snapshot: top level is not an object")
    files = []
    for i, fd in enumerate(_require(doc, "files", "snapshot")):
        where = f"files[{i}]"
        files.append(
            SourceFile(
                path=_require(fd, "path", where),
                language=_require(fd, "language", where),
                content_hash=_require(fd, "content_hash", where),
                component_ids=tuple(_require(fd, "component_ids", where)),
            )
        )
    components = []
    for i, cd in enumerate(_require(doc, "components", "snapshot")):
        where = f"components[{i}]"
        span = _require(cd, "line_span", where)
        if not (isinstance(span, (list, tuple)) and len(span) == 2):
            raise SnapshotParseError(f"{where}: line_span is not a [start, end] pair")
        components.append(
            Component(
                id=_require(cd, "id", where),
                kind=_require(cd, "kind", where),
                file_path=_require(cd, "file_path", where),
                depends_on=tuple(_require(cd, "depends_on", where)),
                source_code=_require(cd, "source_code", where),
                line_span=(int(span[0]), int(span[1])),
            )
        )
    return RepositorySnapshot(
        repo_root=_require(doc, "repo_root", "snapshot"),
        revision_label=_require(doc, "revision_label", "snapshot"),
        files=tuple(files),
        components=tuple(components),
        created_at=doc.get("created_at", utc_now_iso()),
    )


def dump_stable(doc: dict) -> str:
    """Serialize an object tree with stable key order (golden-safe bytes)."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def write_snapshot(snapshot: RepositorySnapshot, destination: str | Path) -> None:
    """Write a validated snapshot as a single structured-text file."""
    violations = validate_snapshot(snapshot)
    if violations:
        raise SnapshotValidationError(violations)
    try:
        Path(destination).write_text(dump_stable(snapshot_to_dict(snapshot)), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {destination}: {exc}") from exc


def read_snapshot(source: str | Path) -> RepositorySnapshot:
    """Read a snapshot file, enforcing every structural invariant."""
    text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(f"snapshot {source}: invalid JSON ({exc})") from exc
    snapshot = snapshot_from_dict(doc)
    violations = validate_snapshot(snapshot)
    if violations:
        raise SnapshotValidationError(violations)
    return snapshot
