"""Ground-truth dataset ingestion in the converted corpus layout.

Layout: one requirement text file per requirement (id = filename stem),
one code document per source file, and a two-column links file of
(requirement id, code id) pairs, '#' comments allowed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetError


@dataclass(frozen=True)
class GroundTruthDataset:
    requirements: tuple[tuple[str, str], ...]
    code_docs: tuple[tuple[str, str], ...]
    links: frozenset[tuple[str, str]]

    def counts(self) -> tuple[int, int, int]:
        return len(self.requirements), len(self.code_docs), len(self.links)

    def gt_groups(self) -> dict[str, set[str]]:
        """Code-id sets grouped by requirement, for group-based link metrics."""
        groups: dict[str, set[str]] = {}
        for req_id, code_id in sorted(self.links):
            groups.setdefault(req_id, set()).add(code_id)
        return groups


def _read_docs(directory: Path, role: str) -> list[tuple[str, str]]:
    if not directory.is_dir():
        raise DatasetError(f"{role} directory does not exist: {directory}")
    docs = []
    seen: set[str] = set()
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        stem = path.stem
        if stem in seen:
            raise DatasetError(f"duplicate {role} id {stem!r} (from {path.name})")
        seen.add(stem)
        docs.append((stem, path.read_text(encoding="utf-8", errors="replace")))
    return docs


def load_coest_dataset(
    req_dir: str | Path, code_dir: str | Path, links_file: str | Path
) -> GroundTruthDataset:
    requirements = _read_docs(Path(req_dir), "requirement")
    code_docs = _read_docs(Path(code_dir), "code")
    req_ids = {rid for rid, _ in requirements}
    code_ids = {cid for cid, _ in code_docs}

    links: set[tuple[str, str]] = set()
    unknown: list[str] = []
    links_path = Path(links_file)
    if not links_path.is_file():
        raise DatasetError(f"links file does not exist: {links_path}")
    for lineno, raw in enumerate(links_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != 2:
            raise DatasetError(f"links file line {lineno}: expected two columns, got {raw!r}")
        req_id, code_id = fields[0].strip(), fields[1].strip()
        if req_id not in req_ids:
            unknown.append(f"line {lineno}: unknown requirement id {req_id!r}")
        if code_id not in code_ids:
            unknown.append(f"line {lineno}: unknown code id {code_id!r}")
        links.add((req_id, code_id))
    if unknown:
        raise DatasetError("links reference unknown ids:\n" + "\n".join(unknown))
    return GroundTruthDataset(
        requirements=tuple(requirements),
        code_docs=tuple(code_docs),
        links=frozenset(links),
    )
