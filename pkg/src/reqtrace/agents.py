"""The four agents and the pipeline orchestrator.

Phases: structure the repository into graphs, derive component-level
then file-level requirements in dependency order (reviewer), then per
file community run the write / verify loop (writer, verifier) with
business-knowledge retrieval (searcher) until approval or the round cap.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .errors import AgentOutputError, GatewayError, PipelineFailure, PreconditionError, SnapshotValidationError
from .gateway import CompletionRequest, Gateway, UsageReport, PhaseUsage
from .graphs import build_cdg, build_fdg, condense_to_dag, topological_order
from .leiden import capped_partition
from .model import (
    ImplementationRequirement,
    RepositorySnapshot,
    UserRequirement,
    validate_snapshot,
)
from .search import KnowledgeItem, search_business_context
from .usecase import (
    USE_CASE_SCHEMA,
    RawVerdict,
    UseCaseDraft,
    parse_queries,
    parse_use_cases,
    parse_verdict,
    render_use_case,
)

logger = logging.getLogger(__name__)

RESULT_SCHEMA_VERSION = 1
DEGRADED_MARKER = "[unparsed-source]"
CRITERIA = ("business_context_value", "completeness", "detail_level")

ROUTE_NONE = "none"
ROUTE_WRITER = "writer"
ROUTE_SEARCHER = "searcher"

_REFORMAT_SUFFIX = "\n\nYour previous reply could not be parsed. Reply again, strictly in the requested fenced format."


@dataclass(frozen=True)
class PipelineOptions:
    model_id: str = "mock-1"
    max_rounds: int = 3
    approval_floor: int = 4
    max_urs_per_community: int = 3
    verifier_code_chars: int = 2000
    max_prompt_chars: int = 4000
    max_knowledge_items: int = 3
    leiden_resolution: float = 1.0
    leiden_seed: int = 0
    max_community_files: int = 20


@dataclass(frozen=True)
class Verdict:
    scores: dict[str, int]
    approved: bool
    feedback: str
    route: str


def make_verdict(raw: RawVerdict, approval_floor: int) -> Verdict:
    approved = all(raw.scores[c] >= approval_floor for c in CRITERIA)
    if approved:
        route = ROUTE_NONE
    elif raw.missing_business_knowledge:
        route = ROUTE_SEARCHER
    else:
        route = ROUTE_WRITER
    return Verdict(scores=dict(raw.scores), approved=approved, feedback=raw.feedback, route=route)


@dataclass
class PipelineResult:
    revision_label: str
    component_irs: dict[str, ImplementationRequirement] = field(default_factory=dict)
    file_irs: dict[str, ImplementationRequirement] = field(default_factory=dict)
    urs: list[UserRequirement] = field(default_factory=list)
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    communities: dict[int, tuple[str, ...]] = field(default_factory=dict)
    rounds_used: dict[int, int] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    derivation_order: list[str] = field(default_factory=list)
    fdg_edges: tuple[tuple[str, str], ...] = ()  # community stability check on refresh
    usage: UsageReport = field(
        default_factory=lambda: UsageReport(per_phase={}, totals=PhaseUsage())
    )


# ---------------------------------------------------------------------------
# Code Reviewer


def _clip(text: str, limit: int) -> str:
    return text if len(text) <= limit else text[:limit]


def derive_component_ir(
    component, dep_irs: list[tuple[str, str]], gateway: Gateway, options: PipelineOptions
) -> ImplementationRequirement:
    """Component-level requirement from source plus one-hop dependency context."""
    if dep_irs:
        lines = "\n".join(f"- {dep_id}: {text}" for dep_id, text in dep_irs)
        dependency_block = f"\nIts direct dependencies, already described:\n{lines}\n"
    else:
        dependency_block = ""
    prompt = prompts.render(
        "ir_component",
        component_id=component.id,
        kind=component.kind,
        file_path=component.file_path,
        source_code=_clip(component.source_code, options.max_prompt_chars),
        dependency_block=dependency_block,
    )
    result = gateway.complete(
        CompletionRequest(options.model_id, "ir_component", prompt), phase="ir_component"
    )
    return ImplementationRequirement(
        target_id=component.id,
        level="component",
        text=result.text.strip(),
        context_ids=tuple(dep_id for dep_id, _ in dep_irs),
        model_id=options.model_id,
        prompt_hash=prompts.prompt_hash(prompt),
    )


def derive_file_ir(
    source_file,
    component_irs: list[tuple[str, str]],
    gateway: Gateway,
    options: PipelineOptions,
    raw_text: str = "",
) -> ImplementationRequirement:
    """File-level requirement aggregating the file's component requirements.

    Files with zero parsed components degrade to the raw file text and
    the resulting text carries a degraded-mode marker.
    """
    degraded = not component_irs
    if degraded:
        component_block = (
            "The file could not be parsed into components. Raw source:\n"
            + _clip(raw_text, options.max_prompt_chars)
            + "\n"
        )
    else:
        lines = "\n".join(f"- {cid}: {text}" for cid, text in component_irs)
        component_block = f"Component requirements:\n{lines}\n"
    prompt = prompts.render(
        "ir_file", file_path=source_file.path, component_block=component_block
    )
    result = gateway.complete(CompletionRequest(options.model_id, "ir_file", prompt), phase="ir_file")
    text = result.text.strip()
    if degraded:
        text = f"{DEGRADED_MARKER} {text}"
    return ImplementationRequirement(
        target_id=source_file.path,
        level="file",
        text=text,
        context_ids=tuple(cid for cid, _ in component_irs),
        model_id=options.model_id,
        prompt_hash=prompts.prompt_hash(prompt),
    )


# ---------------------------------------------------------------------------
# Searcher


def identify_knowledge_gaps(
    file_irs: list[tuple[str, str]],
    gateway: Gateway,
    options: PipelineOptions,
    feedback: str = "",
) -> list[str]:
    """Search queries for business knowledge the file requirements lack."""
    if not file_irs:
        raise PreconditionError("identify_knowledge_gaps requires a non-empty IR list")
    ir_block = "\n".join(f"- {path}: {text}" for path, text in file_irs)
    feedback_block = f"\nVerifier feedback to address:\n{feedback}\n" if feedback else ""
    prompt = prompts.render("knowledge_gaps", file_irs=ir_block, feedback_block=feedback_block)
    result = gateway.complete(
        CompletionRequest(options.model_id, "knowledge_gaps", prompt), phase="search"
    )
    try:
        return parse_queries(result.text)
    except AgentOutputError as exc:
        logger.warning("knowledge-gap reply unparseable, assuming no gaps: %s", exc)
        return []


# ---------------------------------------------------------------------------
# Writer


def _knowledge_block(knowledge: list[KnowledgeItem]) -> str:
    if not knowledge:
        return ""
    lines = "\n".join(f"- [{item.source_label}] {item.excerpt}" for item in knowledge)
    return f"\nBusiness knowledge retrieved for this group:\n{lines}\n"


def _drafts_to_urs(
    drafts: list[UseCaseDraft],
    community_id: int,
    community_files: tuple[str, ...],
    knowledge: list[KnowledgeItem],
) -> list[UserRequirement]:
    provided_labels = sorted({item.source_label for item in knowledge})
    urs = []
    for i, draft in enumerate(drafts):
        for path in draft.source_files:
            if path not in community_files:
                raise AgentOutputError(
                    f"use case cites file outside its community: {path}"
                )
        rules = []
        for rule in draft.business_rules:
            if any(label in rule for label in provided_labels):
                rules.append(rule)
            else:
                logger.warning("dropping business rule citing no provided source: %r", rule)
        urs.append(
            UserRequirement(
                ur_id=f"UR-{community_id:03d}-{i + 1}",
                name=draft.name,
                actors=tuple(draft.actors),
                description=draft.description,
                preconditions=tuple(draft.preconditions),
                event_flow=tuple(draft.event_flow),
                exit_conditions=tuple(draft.exit_conditions),
                business_rules=tuple(rules),
                community_id=community_id,
                source_file_paths=tuple(draft.source_files) or community_files,
            )
        )
    return urs


def write_ur(
    community_id: int,
    community_files: tuple[str, ...],
    file_irs: list[tuple[str, str]],
    knowledge: list[KnowledgeItem],
    prior_feedback: Verdict | str | None,
    gateway: Gateway,
    options: PipelineOptions,
) -> list[UserRequirement]:
    """Draft 1..max use cases for one community; one reformat retry."""
    stale = [path for path, text in file_irs if not text.strip()]
    if stale:
        raise PreconditionError(f"file IRs unavailable for: {', '.join(stale)}")
    feedback_text = prior_feedback.feedback if isinstance(prior_feedback, Verdict) else (prior_feedback or "")
    feedback_block = (
        f"\nVerifier feedback on the previous draft; revise accordingly:\n{feedback_text}\n"
        if feedback_text
        else ""
    )
    prompt = prompts.render(
        "write_ur",
        community_files="\n".join(f"- {p}" for p in community_files),
        file_irs="\n".join(f"- {path}: {text}" for path, text in file_irs),
        knowledge_block=_knowledge_block(knowledge),
        feedback_block=feedback_block,
        max_urs=str(options.max_urs_per_community),
        use_case_schema=USE_CASE_SCHEMA,
    )
    request = CompletionRequest(options.model_id, "write_ur", prompt)
    result = gateway.complete(request, phase="write")
    try:
        drafts = parse_use_cases(result.text)
    except AgentOutputError:
        retry = CompletionRequest(options.model_id, "write_ur", prompt + _REFORMAT_SUFFIX)
        result = gateway.complete(retry, phase="write")
        drafts = parse_use_cases(result.text)  # second failure propagates
    drafts = drafts[: options.max_urs_per_community]
    return _drafts_to_urs(drafts, community_id, community_files, knowledge)


# ---------------------------------------------------------------------------
# Verifier


def verify_ur(
    ur: UserRequirement,
    file_irs: list[tuple[str, str]],
    code_excerpts: list[tuple[str, str]],
    gateway: Gateway,
    options: PipelineOptions,
) -> Verdict:
    """Score a draft against its code context and route the feedback."""
    prompt = prompts.render(
        "verify_ur",
        use_case=render_use_case(ur.use_case_fields()),
        file_irs="\n".join(f"- {path}: {text}" for path, text in file_irs),
        code_excerpts="\n".join(
            f"--- {path} ---\n{_clip(text, options.verifier_code_chars)}"
            for path, text in code_excerpts
        ),
    )
    request = CompletionRequest(options.model_id, "verify_ur", prompt)
    result = gateway.complete(request, phase="verify")
    try:
        raw = parse_verdict(result.text)
    except AgentOutputError:
        retry = CompletionRequest(options.model_id, "verify_ur", prompt + _REFORMAT_SUFFIX)
        result = gateway.complete(retry, phase="verify")
        try:
            raw = parse_verdict(result.text)
        except AgentOutputError:
            raw = RawVerdict(
                scores={c: 1 for c in CRITERIA},
                missing_business_knowledge=False,
                feedback=result.text.strip(),
            )
    return make_verdict(raw, options.approval_floor)


# ---------------------------------------------------------------------------
# orchestrator


def default_file_text_provider(snapshot: RepositorySnapshot):
    """Read file text from the working tree, falling back to component sources."""
    root = Path(snapshot.repo_root)
    comp_by_file: dict[str, list] = {}
    for comp in snapshot.components:
        comp_by_file.setdefault(comp.file_path, []).append(comp)

    def provider(path: str) -> str:
        candidate = root / path
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8", errors="replace")
        parts = sorted(comp_by_file.get(path, []), key=lambda c: c.id)
        return "\n".join(c.source_code for c in parts)

    return provider


def run_pipeline(
    snapshot: RepositorySnapshot,
    gateway: Gateway,
    search_backend,
    options: PipelineOptions | None = None,
    file_text=None,
) -> PipelineResult:
    """Full three-phase run over a snapshot; deterministic under the mock backend."""
    options = options or PipelineOptions()
    violations = validate_snapshot(snapshot)
    if violations:
        raise SnapshotValidationError(violations)
    if file_text is None:
        file_text = default_file_text_provider(snapshot)

    result = PipelineResult(revision_label=snapshot.revision_label)
    cdg = build_cdg(snapshot)
    fdg = build_fdg(snapshot, cdg)
    condensed_cdg = condense_to_dag(cdg)
    condensed_fdg = condense_to_dag(fdg)
    comp_map = snapshot.component_map()
    file_map = snapshot.file_map()
    result.fdg_edges = tuple(sorted(fdg.edges))

    try:
        # phase 2: component requirements, dependencies first
        comp_adjacency = condensed_cdg.dag.adjacency()
        for cid in topological_order(condensed_cdg.dag):
            deps = sorted(comp_adjacency[cid])
            dep_irs = []
            for dep in deps:
                ir = result.component_irs[dep]  # exists by topological order
                if ir.stale:
                    raise PreconditionError(f"dependency IR is stale: {dep}")
                dep_irs.append((dep, ir.text))
            result.component_irs[cid] = derive_component_ir(comp_map[cid], dep_irs, gateway, options)
            result.derivation_order.append(cid)

        # file requirements once all their components exist
        for path in topological_order(condensed_fdg.dag):
            source_file = file_map[path]
            comp_irs = [(cid, result.component_irs[cid].text) for cid in sorted(source_file.component_ids)]
            raw = file_text(path) if not comp_irs else ""
            result.file_irs[path] = derive_file_ir(source_file, comp_irs, gateway, options, raw_text=raw)
            result.derivation_order.append(path)

        # phase 3: community-by-community use-case generation
        partition = capped_partition(
            fdg, options.leiden_resolution, options.leiden_seed, options.max_community_files
        )
        result.communities = dict(sorted(partition.communities().items()))
        for community_id, files in result.communities.items():
            _generate_community(
                result, community_id, files, gateway, search_backend, options, file_text
            )
    except GatewayError as exc:
        result.usage = gateway.usage_report()
        raise PipelineFailure(f"backend failure aborted the run: {exc}", partial=result) from exc

    result.usage = gateway.usage_report()
    return result


def _generate_community(
    result: PipelineResult,
    community_id: int,
    files: tuple[str, ...],
    gateway: Gateway,
    search_backend,
    options: PipelineOptions,
    file_text,
) -> None:
    file_irs = [(path, result.file_irs[path].text) for path in files]
    queries = identify_knowledge_gaps(file_irs, gateway, options)
    knowledge: list[KnowledgeItem] = []
    seen_labels: set[str] = set()
    for query in queries:
        for item in search_business_context(query, search_backend, options.max_knowledge_items):
            if item.source_label not in seen_labels:
                seen_labels.add(item.source_label)
                knowledge.append(item)

    code_excerpts = [(path, file_text(path)) for path in files]
    feedback: Verdict | None = None
    rounds = 0
    while rounds < options.max_rounds:
        rounds += 1
        try:
            urs = write_ur(community_id, files, file_irs, knowledge, feedback, gateway, options)
        except AgentOutputError as exc:
            result.rounds_used[community_id] = rounds
            result.failures.append(
                {"community_id": community_id, "stage": "write", "error": str(exc)}
            )
            return
        verdicts = {ur.ur_id: verify_ur(ur, file_irs, code_excerpts, gateway, options) for ur in urs}
        if all(v.approved for v in verdicts.values()):
            result.rounds_used[community_id] = rounds
            _store_urs(result, community_id, urs, verdicts)
            return
        rejected = [v for v in verdicts.values() if not v.approved]
        feedback_text = " ".join(v.feedback for v in rejected if v.feedback).strip()
        feedback = Verdict(
            scores={},
            approved=False,
            feedback=feedback_text or "The draft did not meet the quality bar; improve it.",
            route=ROUTE_SEARCHER if any(v.route == ROUTE_SEARCHER for v in rejected) else ROUTE_WRITER,
        )
        if feedback.route == ROUTE_SEARCHER:
            more = identify_knowledge_gaps(file_irs, gateway, options, feedback=feedback.feedback)
            for query in more:
                for item in search_business_context(query, search_backend, options.max_knowledge_items):
                    if item.source_label not in seen_labels:
                        seen_labels.add(item.source_label)
                        knowledge.append(item)
        if rounds == options.max_rounds:
            # round cap reached: keep the final drafts, record the rejection
            result.rounds_used[community_id] = rounds
            _store_urs(result, community_id, urs, verdicts)
            result.failures.append(
                {
                    "community_id": community_id,
                    "stage": "verify",
                    "error": "round cap reached without verifier approval",
                }
            )
            return


def _store_urs(result, community_id, urs, verdicts) -> None:
    result.urs.extend(urs)
    result.verdicts.update(verdicts)


# ---------------------------------------------------------------------------
# result serialization


def _ir_to_dict(ir: ImplementationRequirement) -> dict:
    return {
        "target_id": ir.target_id,
        "level": ir.level,
        "text": ir.text,
        "context_ids": list(ir.context_ids),
        "model_id": ir.model_id,
        "prompt_hash": ir.prompt_hash,
        "stale": ir.stale,
    }


def _ir_from_dict(doc: dict) -> ImplementationRequirement:
    return ImplementationRequirement(
        target_id=doc["target_id"],
        level=doc["level"],
        text=doc["text"],
        context_ids=tuple(doc["context_ids"]),
        model_id=doc["model_id"],
        prompt_hash=doc["prompt_hash"],
        stale=doc["stale"],
    )


def _ur_to_dict(ur: UserRequirement) -> dict:
    return {
        "ur_id": ur.ur_id,
        "name": ur.name,
        "actors": list(ur.actors),
        "description": ur.description,
        "preconditions": list(ur.preconditions),
        "event_flow": list(ur.event_flow),
        "exit_conditions": list(ur.exit_conditions),
        "business_rules": list(ur.business_rules),
        "community_id": ur.community_id,
        "source_file_paths": list(ur.source_file_paths),
        "stale": ur.stale,
    }


def _ur_from_dict(doc: dict) -> UserRequirement:
    return UserRequirement(
        ur_id=doc["ur_id"],
        name=doc["name"],
        actors=tuple(doc["actors"]),
        description=doc["description"],
        preconditions=tuple(doc["preconditions"]),
        event_flow=tuple(doc["event_flow"]),
        exit_conditions=tuple(doc["exit_conditions"]),
        business_rules=tuple(doc["business_rules"]),
        community_id=doc["community_id"],
        source_file_paths=tuple(doc["source_file_paths"]),
        stale=doc["stale"],
    )


def result_to_dict(result: PipelineResult) -> dict:
    """Serializable form; wall times are kept out so files are byte-stable."""
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "revision_label": result.revision_label,
        "communities": {str(cid): list(files) for cid, files in sorted(result.communities.items())},
        "component_irs": {cid: _ir_to_dict(ir) for cid, ir in sorted(result.component_irs.items())},
        "file_irs": {path: _ir_to_dict(ir) for path, ir in sorted(result.file_irs.items())},
        "urs": [_ur_to_dict(ur) for ur in sorted(result.urs, key=lambda u: u.ur_id)],
        "verdicts": {
            ur_id: {
                "scores": dict(sorted(v.scores.items())),
                "approved": v.approved,
                "feedback": v.feedback,
                "route": v.route,
            }
            for ur_id, v in sorted(result.verdicts.items())
        },
        "rounds_used": {str(cid): n for cid, n in sorted(result.rounds_used.items())},
        "failures": result.failures,
        "derivation_order": list(result.derivation_order),
        "fdg_edges": [list(edge) for edge in sorted(result.fdg_edges)],
        "usage": result.usage.to_dict(include_wall=False),
    }


def result_from_dict(doc: dict) -> PipelineResult:
    usage_doc = doc.get("usage", {"per_phase": {}, "totals": {}})
    per_phase = {
        phase: PhaseUsage(
            calls=row.get("calls", 0),
            prompt_tokens=row.get("prompt_tokens", 0),
            output_tokens=row.get("output_tokens", 0),
            wall_ms=row.get("wall_ms", 0),
        )
        for phase, row in usage_doc["per_phase"].items()
    }
    totals_row = usage_doc["totals"]
    totals = PhaseUsage(
        calls=totals_row.get("calls", 0),
        prompt_tokens=totals_row.get("prompt_tokens", 0),
        output_tokens=totals_row.get("output_tokens", 0),
        wall_ms=totals_row.get("wall_ms", 0),
    )
    return PipelineResult(
        revision_label=doc["revision_label"],
        component_irs={cid: _ir_from_dict(d) for cid, d in doc["component_irs"].items()},
        file_irs={path: _ir_from_dict(d) for path, d in doc["file_irs"].items()},
        urs=[_ur_from_dict(d) for d in doc["urs"]],
        verdicts={
            ur_id: Verdict(
                scores=dict(v["scores"]),
                approved=v["approved"],
                feedback=v["feedback"],
                route=v["route"],
            )
            for ur_id, v in doc.get("verdicts", {}).items()
        },
        communities={int(cid): tuple(files) for cid, files in doc["communities"].items()},
        rounds_used={int(cid): n for cid, n in doc["rounds_used"].items()},
        failures=list(doc.get("failures", [])),
        derivation_order=list(doc.get("derivation_order", [])),
        fdg_edges=tuple(tuple(edge) for edge in doc.get("fdg_edges", [])),
        usage=UsageReport(per_phase=per_phase, totals=totals),
    )


def write_result(result: PipelineResult, destination: str | Path) -> None:
    from .model import dump_stable

    Path(destination).write_text(dump_stable(result_to_dict(result)), encoding="utf-8")


def read_result(source: str | Path) -> PipelineResult:
    return result_from_dict(json.loads(Path(source).read_text(encoding="utf-8")))
