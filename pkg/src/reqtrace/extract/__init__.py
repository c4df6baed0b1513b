"""Repository scanning: file filtering, component extraction, dependency edges."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from fnmatch import fnmatch
from pathlib import Path, PurePosixPath

from ..model import (
    KIND_CLASS,
    KIND_ENUM,
    KIND_INTERFACE,
    KIND_METHOD,
    Component,
    RepositorySnapshot,
    SourceFile,
    component_id,
    content_hash,
)
from .javasrc import parse_java
from .pysrc import Declaration, ParsedFile, parse_python

logger = logging.getLogger(__name__)

EXTENSIONS = {".java": "java", ".py": "python"}
CLASSLIKE = frozenset({KIND_CLASS, KIND_INTERFACE, KIND_ENUM})


@dataclass(frozen=True)
class ExtractionConfig:
    include_globs: tuple[str, ...] = ()
    exclude_globs: tuple[str, ...] = ()
    languages: tuple[str, ...] = ("java", "python")
    max_file_bytes: int = 1_048_576

    def __post_init__(self):
        if self.max_file_bytes <= 0:
            raise ValueError("max_file_bytes must be positive")
        if not self.languages:
            raise ValueError("languages must be non-empty")


@dataclass(frozen=True)
class RefSet:
    """References a declaration makes: supertypes and call targets."""

    bases: frozenset[str] = frozenset()
    calls: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ImportTable:
    names: tuple[tuple[str, str], ...] = ()  # (local name, dotted target)
    wildcards: tuple[str, ...] = ()

    def lookup(self, name: str) -> str | None:
        for local, dotted in self.names:
            if local == name:
                return dotted
        return None


def parse_source(path: str, text: str, language: str) -> ParsedFile:
    if language == "python":
        return parse_python(path, text)
    if language == "java":
        return parse_java(path, text)
    raise ValueError(f"unsupported language: {language}")


def _components_of(path: str, parsed: ParsedFile) -> tuple[list[Component], dict[str, RefSet]]:
    """Build components from declarations, merging same-named overloads."""
    by_name: dict[str, Declaration] = {}
    merged_refs: dict[str, tuple[set[str], set[str]]] = {}
    for decl in parsed.declarations:
        if decl.qualified_name in by_name:
            bases, calls = merged_refs[decl.qualified_name]
        else:
            by_name[decl.qualified_name] = decl
            bases, calls = set(), set()
            merged_refs[decl.qualified_name] = (bases, calls)
        bases.update(decl.bases)
        calls.update(decl.calls)

    components = []
    refs = {}
    for qname, decl in by_name.items():
        cid = component_id(path, qname)
        components.append(
            Component(
                id=cid,
                kind=decl.kind,
                file_path=path,
                depends_on=(),
                source_code=decl.source_code,
                line_span=decl.line_span,
            )
        )
        bases, calls = merged_refs[qname]
        refs[cid] = RefSet(bases=frozenset(bases), calls=frozenset(calls))
    return components, refs


def extract_components(path: str, text: str, language: str) -> list[Component]:
    """Components declared in one source file (dependency edges not yet resolved)."""
    parsed = parse_source(path, text, language)
    if parsed.error:
        logger.warning("parse error, file kept with zero components: %s", parsed.error)
        return []
    components, _ = _components_of(path, parsed)
    return sorted(components, key=lambda c: c.id)


# ---------------------------------------------------------------------------
# dependency resolution


def _dotted_module(path: str) -> str:
    p = PurePosixPath(path)
    stem = p.with_suffix("").as_posix()
    if stem.endswith("/__init__"):
        stem = stem[: -len("/__init__")]
    return stem.replace("/", ".")


class _Resolver:
    def __init__(self, components: list[Component], file_imports: dict[str, ImportTable]):
        self.file_imports = file_imports
        self.by_id = {c.id: c for c in components}
        self.simple_index: dict[str, list[str]] = {}
        self.module_index: dict[str, dict[str, str]] = {}
        self.by_file_qualified: dict[tuple[str, str], str] = {}
        for c in sorted(components, key=lambda c: c.id):
            simple = c.qualified_name.split(".")[-1]
            self.simple_index.setdefault(simple, []).append(c.id)
            module = _dotted_module(c.file_path)
            self.module_index.setdefault(module, {})[c.qualified_name] = c.id
            self.by_file_qualified[(c.file_path, c.qualified_name)] = c.id

    def import_target(self, dotted: str) -> str | None:
        """Component named by a dotted import path, if repo-internal."""
        parts = dotted.split(".")
        # a Java import names the file after the class: a.b.C -> a/b/C.java::C
        candidates = [(dotted, parts[-1])]
        for k in range(len(parts) - 1, 0, -1):
            candidates.append((".".join(parts[:k]), ".".join(parts[k:])))
        for module, qualified in candidates:
            cid = self.module_index.get(module, {}).get(qualified)
            if cid:
                return cid
        return None

    def simple_match(self, name: str, from_comp: Component, classlike_only: bool) -> str | None:
        """Unique simple-name match, with same-directory preference on ties."""
        candidates = self.simple_index.get(name, [])
        if classlike_only:
            candidates = [cid for cid in candidates if self.by_id[cid].kind in CLASSLIKE]
        if len(candidates) == 1:
            return candidates[0]
        if len(candidates) > 1:
            here = PurePosixPath(from_comp.file_path).parent
            local = [cid for cid in candidates if PurePosixPath(self.by_id[cid].file_path).parent == here]
            if len(local) == 1:
                return local[0]
        return None

    def resolve_name(self, name: str, from_comp: Component, classlike_only: bool = False) -> str | None:
        table = self.file_imports.get(from_comp.file_path, ImportTable())
        if "." in name:
            head, rest = name.split(".", 1)
            dotted = table.lookup(head)
            if dotted is not None:
                return self.import_target(f"{dotted}.{rest}")
            owner = self.simple_match(head, from_comp, classlike_only=True)
            if owner is not None:
                owner_comp = self.by_id[owner]
                cid = self.by_file_qualified.get(
                    (owner_comp.file_path, f"{owner_comp.qualified_name}.{rest}")
                )
                if cid:
                    return cid
            # fall back to the member name alone (instance calls like obj.save())
            return self.resolve_name(rest, from_comp, classlike_only)
        dotted = table.lookup(name)
        if dotted is not None:
            # explicitly imported: repo-internal or nothing
            return self.import_target(dotted)
        hits = []
        for pkg in table.wildcards:
            cid = self.import_target(f"{pkg}.{name}")
            if cid:
                hits.append(cid)
        if len(hits) == 1:
            return hits[0]
        return self.simple_match(name, from_comp, classlike_only)


def resolve_dependencies(
    components: list[Component],
    references: dict[str, RefSet],
    file_imports: dict[str, ImportTable],
) -> list[tuple[str, str]]:
    """Directed depends-on edges between snapshot components.

    Resolution order per referenced name: explicit import, then supertype
    or call identifier with a unique repo match; ambiguous simple names
    fall back to the same directory or are dropped as external.
    """
    resolver = _Resolver(components, file_imports)
    edges: set[tuple[str, str]] = set()
    for comp in sorted(components, key=lambda c: c.id):
        refs = references.get(comp.id, RefSet())
        for base in sorted(refs.bases):
            target = resolver.resolve_name(base, comp, classlike_only=True)
            if target and target != comp.id:
                edges.add((comp.id, target))
        for call in sorted(refs.calls):
            target = resolver.resolve_name(call, comp)
            if target and target != comp.id:
                edges.add((comp.id, target))

    # a class depends on the union of its direct methods' dependencies
    children: dict[str, list[str]] = {}
    for comp in components:
        if comp.kind == KIND_METHOD and "." in comp.qualified_name:
            parent_q = comp.qualified_name.rsplit(".", 1)[0]
            parent_id = component_id(comp.file_path, parent_q)
            children.setdefault(parent_id, []).append(comp.id)
    for comp in components:
        if comp.kind in CLASSLIKE:
            for method_id in children.get(comp.id, []):
                for src, dst in list(edges):
                    if src == method_id and dst != comp.id:
                        edges.add((comp.id, dst))
    return sorted(edges)


# ---------------------------------------------------------------------------
# repository scan


def _matches(rel: str, config: ExtractionConfig) -> bool:
    if config.include_globs and not any(fnmatch(rel, g) for g in config.include_globs):
        return False
    return not any(fnmatch(rel, g) for g in config.exclude_globs)


def iter_source_files(root: Path, config: ExtractionConfig) -> list[tuple[str, Path]]:
    """Deterministic (relative path, absolute path) listing of matching files."""
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d != ".git")
        for fname in sorted(filenames):
            ext = os.path.splitext(fname)[1]
            language = EXTENSIONS.get(ext)
            if language is None or language not in config.languages:
                continue
            abs_path = Path(dirpath) / fname
            rel = abs_path.relative_to(root).as_posix()
            if _matches(rel, config):
                found.append((rel, abs_path))
    return sorted(found)


def scan_repository(
    root: str | Path,
    config: ExtractionConfig | None = None,
    revision_label: str | None = None,
) -> RepositorySnapshot:
    """Scan a working tree into a validated snapshot.

    Files over the size cap and unparseable files are kept out of or
    degraded in the snapshot with a logged warning; neither aborts the scan.
    """
    config = config or ExtractionConfig()
    root = Path(root)
    if not root.is_dir():
        raise OSError(f"not a readable directory: {root}")

    files: list[SourceFile] = []
    all_components: list[Component] = []
    references: dict[str, RefSet] = {}
    file_imports: dict[str, ImportTable] = {}

    for rel, abs_path in iter_source_files(root, config):
        raw = abs_path.read_bytes()
        if len(raw) > config.max_file_bytes:
            logger.warning("skipping %s: %d bytes exceeds max_file_bytes", rel, len(raw))
            continue
        language = EXTENSIONS[os.path.splitext(rel)[1]]
        text = raw.decode("utf-8", errors="replace")
        parsed = parse_source(rel, text, language)
        if parsed.error:
            logger.warning("parse error, file kept with zero components: %s", parsed.error)
            components: list[Component] = []
        else:
            components, refs = _components_of(rel, parsed)
            references.update(refs)
            file_imports[rel] = ImportTable(
                names=tuple(sorted(parsed.imports.items())),
                wildcards=tuple(parsed.wildcard_imports),
            )
        all_components.extend(components)
        files.append(
            SourceFile(
                path=rel,
                language=language,
                content_hash=content_hash(raw),
                component_ids=tuple(sorted(c.id for c in components)),
            )
        )

    edges = resolve_dependencies(all_components, references, file_imports)
    deps: dict[str, list[str]] = {}
    for src, dst in edges:
        deps.setdefault(src, []).append(dst)
    final_components = tuple(
        sorted(
            (
                Component(
                    id=c.id,
                    kind=c.kind,
                    file_path=c.file_path,
                    depends_on=tuple(sorted(deps.get(c.id, []))),
                    source_code=c.source_code,
                    line_span=c.line_span,
                )
                for c in all_components
            ),
            key=lambda c: c.id,
        )
    )

    if revision_label is None:
        digest = content_hash("\n".join(f"{f.path} {f.content_hash}" for f in files).encode())
        revision_label = f"rev-{digest[:12]}"

    return RepositorySnapshot(
        repo_root=str(root),
        revision_label=revision_label,
        files=tuple(sorted(files, key=lambda f: f.path)),
        components=final_components,
    )
