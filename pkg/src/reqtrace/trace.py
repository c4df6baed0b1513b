"""Trace links from user requirements down to files and components.

Links stay "live": given an old and a new snapshot, invalidate computes
the exact set of artifacts whose inputs changed (transitively, over
reverse dependency edges), and refresh re-derives only that set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .agents import (
    PipelineOptions,
    PipelineResult,
    _generate_community,
    derive_component_ir,
    derive_file_ir,
    default_file_text_provider,
)
from .errors import PreconditionError, TraceIntegrityError
from .graphs import build_cdg, build_fdg, condense_to_dag, topological_order
from .leiden import capped_partition
from .model import RepositorySnapshot, dump_stable

TRACE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TraceLinkRecord:
    ur_id: str
    file_paths: tuple[str, ...]
    component_ids: tuple[str, ...]
    revision_label: str
    stale: bool = False


@dataclass(frozen=True)
class TraceSet:
    revision_label: str
    records: tuple[TraceLinkRecord, ...]

    def by_ur(self) -> dict[str, TraceLinkRecord]:
        return {r.ur_id: r for r in self.records}


@dataclass(frozen=True)
class StaleSet:
    changed_files: tuple[str, ...]
    stale_component_irs: tuple[str, ...]
    stale_file_irs: tuple[str, ...]
    stale_ur_ids: tuple[str, ...]

    def is_empty(self) -> bool:
        return not (
            self.changed_files
            or self.stale_component_irs
            or self.stale_file_irs
            or self.stale_ur_ids
        )


def record_links(result: PipelineResult, snapshot: RepositorySnapshot) -> TraceSet:
    """One trace record per user requirement, at the snapshot's revision."""
    file_map = snapshot.file_map()
    records = []
    for ur in sorted(result.urs, key=lambda u: u.ur_id):
        for path in ur.source_file_paths:
            if path not in file_map:
                raise TraceIntegrityError(f"{ur.ur_id} references file outside snapshot: {path}")
        component_ids: set[str] = set()
        for path in ur.source_file_paths:
            component_ids.update(file_map[path].component_ids)
        records.append(
            TraceLinkRecord(
                ur_id=ur.ur_id,
                file_paths=tuple(sorted(ur.source_file_paths)),
                component_ids=tuple(sorted(component_ids)),
                revision_label=snapshot.revision_label,
                stale=ur.stale,
            )
        )
    return TraceSet(revision_label=snapshot.revision_label, records=tuple(records))


def invalidate(
    trace_set: TraceSet,
    old_snapshot: RepositorySnapshot,
    new_snapshot: RepositorySnapshot,
) -> StaleSet:
    """Exactly the downstream artifacts whose inputs changed between snapshots.

    Component staleness propagates over reverse dependency edges of both
    snapshots' graphs: a changed one-hop context can alter an IR, which
    is context one hop further out, so the closure is the sound fixpoint.
    """
    old_hash = {f.path: f.content_hash for f in old_snapshot.files}
    new_hash = {f.path: f.content_hash for f in new_snapshot.files}
    changed = sorted(
        path
        for path in set(old_hash) | set(new_hash)
        if old_hash.get(path) != new_hash.get(path)
    )
    changed_set = set(changed)

    old_deps = {c.id: set(c.depends_on) for c in old_snapshot.components}
    new_deps = {c.id: set(c.depends_on) for c in new_snapshot.components}

    seeds: set[str] = set()
    for comp in list(old_snapshot.components) + list(new_snapshot.components):
        if comp.file_path in changed_set:
            seeds.add(comp.id)
    for cid in set(old_deps) & set(new_deps):
        if old_deps[cid] != new_deps[cid]:
            seeds.add(cid)  # resolution shifted even though the file did not change
    for cid in set(old_deps) ^ set(new_deps):
        seeds.add(cid)  # added or removed component

    reverse: dict[str, set[str]] = {}
    for deps_map in (old_deps, new_deps):
        for cid, deps in deps_map.items():
            for dep in deps:
                reverse.setdefault(dep, set()).add(cid)

    stale_components = set(seeds)
    frontier = list(seeds)
    while frontier:
        node = frontier.pop()
        for dependent in reverse.get(node, ()):
            if dependent not in stale_components:
                stale_components.add(dependent)
                frontier.append(dependent)

    owners: set[str] = set(changed)
    for snapshot in (old_snapshot, new_snapshot):
        for comp in snapshot.components:
            if comp.id in stale_components:
                owners.add(comp.file_path)

    stale_urs = sorted(
        record.ur_id
        for record in trace_set.records
        if set(record.file_paths) & owners
    )
    return StaleSet(
        changed_files=tuple(changed),
        stale_component_irs=tuple(sorted(stale_components)),
        stale_file_irs=tuple(sorted(owners)),
        stale_ur_ids=tuple(stale_urs),
    )


@dataclass(frozen=True)
class RefreshDelta:
    rederived_component_irs: tuple[str, ...]
    rederived_file_irs: tuple[str, ...]
    regenerated_communities: tuple[int, ...]
    dropped_ur_ids: tuple[str, ...]


def refresh(
    prior_result: PipelineResult,
    stale_set: StaleSet,
    new_snapshot: RepositorySnapshot,
    gateway,
    search_backend,
    options: PipelineOptions | None = None,
    file_text=None,
) -> tuple[PipelineResult, TraceSet, RefreshDelta]:
    """Re-derive only stale artifacts, in dependency order; reuse the rest."""
    options = options or PipelineOptions()
    if file_text is None:
        file_text = default_file_text_provider(new_snapshot)

    cdg = build_cdg(new_snapshot)
    fdg = build_fdg(new_snapshot, cdg)
    condensed_cdg = condense_to_dag(cdg)
    condensed_fdg = condense_to_dag(fdg)
    comp_map = new_snapshot.component_map()
    file_map = new_snapshot.file_map()
    stale_comps = set(stale_set.stale_component_irs)
    stale_files = set(stale_set.stale_file_irs)

    result = PipelineResult(revision_label=new_snapshot.revision_label)
    comp_adjacency = condensed_cdg.dag.adjacency()
    rederived_comps = []
    for cid in topological_order(condensed_cdg.dag):
        if cid in stale_comps:
            deps = sorted(comp_adjacency[cid])
            dep_irs = [(dep, result.component_irs[dep].text) for dep in deps]
            result.component_irs[cid] = derive_component_ir(comp_map[cid], dep_irs, gateway, options)
            result.derivation_order.append(cid)
            rederived_comps.append(cid)
        else:
            prior = prior_result.component_irs.get(cid)
            if prior is None:
                raise PreconditionError(f"component {cid} is neither stale nor previously derived")
            result.component_irs[cid] = prior

    rederived_files = []
    for path in topological_order(condensed_fdg.dag):
        if path in stale_files:
            source_file = file_map[path]
            comp_irs = [
                (cid, result.component_irs[cid].text) for cid in sorted(source_file.component_ids)
            ]
            raw = file_text(path) if not comp_irs else ""
            result.file_irs[path] = derive_file_ir(
                source_file, comp_irs, gateway, options, raw_text=raw
            )
            result.derivation_order.append(path)
            rederived_files.append(path)
        else:
            prior = prior_result.file_irs.get(path)
            if prior is None:
                raise PreconditionError(f"file {path} is neither stale nor previously derived")
            result.file_irs[path] = prior

    # communities: recompute only if the file-graph edge set changed,
    # so user-requirement identity survives content-only edits
    prior_communities = dict(sorted(prior_result.communities.items()))
    new_edges = {tuple(e) for e in fdg.edges}
    if set(prior_result.fdg_edges) == new_edges and set(fdg.nodes) == set(
        path for files in prior_communities.values() for path in files
    ):
        communities = prior_communities
    else:
        partition = capped_partition(
            fdg, options.leiden_resolution, options.leiden_seed, options.max_community_files
        )
        communities = dict(sorted(partition.communities().items()))
    result.communities = communities
    result.fdg_edges = tuple(sorted(fdg.edges))

    regenerated = []
    dropped: list[str] = []
    prior_by_community: dict[tuple[str, ...], int] = {
        files: cid for cid, files in prior_communities.items()
    }
    for community_id, files in communities.items():
        prior_cid = prior_by_community.get(files)
        untouched = prior_cid is not None and not (set(files) & stale_files)
        if untouched:
            kept = [ur for ur in prior_result.urs if ur.community_id == prior_cid]
            for ur in kept:
                remapped = replace(ur, community_id=community_id)
                result.urs.append(remapped)
                if ur.ur_id in prior_result.verdicts:
                    result.verdicts[ur.ur_id] = prior_result.verdicts[ur.ur_id]
            result.rounds_used[community_id] = prior_result.rounds_used.get(prior_cid, 0)
        else:
            regenerated.append(community_id)
            _generate_community(
                result, community_id, files, gateway, search_backend, options, file_text
            )
    surviving = {ur.ur_id for ur in result.urs}
    dropped = sorted(
        ur.ur_id for ur in prior_result.urs if ur.ur_id not in surviving
    )

    result.usage = gateway.usage_report()
    trace = record_links(result, new_snapshot)
    delta = RefreshDelta(
        rederived_component_irs=tuple(rederived_comps),
        rederived_file_irs=tuple(rederived_files),
        regenerated_communities=tuple(regenerated),
        dropped_ur_ids=tuple(dropped),
    )
    return result, trace, delta


# ---------------------------------------------------------------------------
# persistence: current-state file plus an append-only revision log


def trace_to_dict(trace: TraceSet) -> dict:
    return {
        "schema_version": TRACE_SCHEMA_VERSION,
        "revision_label": trace.revision_label,
        "records": [
            {
                "ur_id": r.ur_id,
                "file_paths": list(r.file_paths),
                "component_ids": list(r.component_ids),
                "revision_label": r.revision_label,
                "stale": r.stale,
            }
            for r in trace.records
        ],
    }


def trace_from_dict(doc: dict) -> TraceSet:
    return TraceSet(
        revision_label=doc["revision_label"],
        records=tuple(
            TraceLinkRecord(
                ur_id=r["ur_id"],
                file_paths=tuple(r["file_paths"]),
                component_ids=tuple(r["component_ids"]),
                revision_label=r["revision_label"],
                stale=r["stale"],
            )
            for r in doc["records"]
        ),
    )


def write_trace(trace: TraceSet, destination: str | Path) -> None:
    destination = Path(destination)
    destination.write_text(dump_stable(trace_to_dict(trace)), encoding="utf-8")
    log_path = destination.with_suffix(destination.suffix + ".log.jsonl")
    with log_path.open("a", encoding="utf-8") as log:
        log.write(json.dumps(trace_to_dict(trace), sort_keys=True) + "\n")


def read_trace(source: str | Path) -> TraceSet:
    return trace_from_dict(json.loads(Path(source).read_text(encoding="utf-8")))
