"""Fenced structured blocks exchanged with agents: use cases, verdicts, queries.

The Writer must emit use cases inside ```usecase fences using a strict
line format; free text around the fences is ignored, everything inside
is parsed strictly so malformed output fails loudly instead of leaking
half-filled requirements.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import AgentOutputError

SCALAR_FIELDS = ("name", "description")
LIST_FIELDS = ("actors", "preconditions", "event_flow", "exit_conditions")
OPTIONAL_LIST_FIELDS = ("business_rules", "source_files")
ALL_FIELDS = SCALAR_FIELDS + LIST_FIELDS + OPTIONAL_LIST_FIELDS

USE_CASE_SCHEMA = """```usecase
name: <short title>
actors:
- <actor>
description: <one sentence: what the system shall allow users to achieve>
preconditions:
- <condition>
event_flow:
- <step, in order>
exit_conditions:
- <condition>
business_rules:
- <cited knowledge source and rule; omit the section if none used>
```"""


@dataclass
class UseCaseDraft:
    name: str = ""
    description: str = ""
    actors: list[str] = field(default_factory=list)
    preconditions: list[str] = field(default_factory=list)
    event_flow: list[str] = field(default_factory=list)
    exit_conditions: list[str] = field(default_factory=list)
    business_rules: list[str] = field(default_factory=list)
    source_files: list[str] = field(default_factory=list)


_FENCE_RE = re.compile(r"```(\w+)\n(.*?)```", re.DOTALL)


def fenced_blocks(text: str, tag: str) -> list[str]:
    return [body for found_tag, body in _FENCE_RE.findall(text) if found_tag == tag]


def _parse_block(body: str) -> UseCaseDraft:
    draft = UseCaseDraft()
    current_list: list[str] | None = None
    for raw in body.split("\n"):
        line = raw.rstrip()
        if not line.strip():
            continue
        if line.startswith("- "):
            if current_list is None:
                raise AgentOutputError(f"use case block: list item outside a list field: {line!r}")
            current_list.append(line[2:].strip())
            continue
        if ":" not in line:
            raise AgentOutputError(f"use case block: unparseable line: {line!r}")
        key, _, rest = line.partition(":")
        key = key.strip()
        rest = rest.strip()
        if key in SCALAR_FIELDS:
            setattr(draft, key, rest)
            current_list = None
        elif key in LIST_FIELDS + OPTIONAL_LIST_FIELDS:
            current_list = getattr(draft, key)
            if rest:  # inline single item is tolerated
                current_list.append(rest)
        else:
            raise AgentOutputError(f"use case block: unknown field {key!r}")
    missing = [f for f in SCALAR_FIELDS if not getattr(draft, f).strip()]
    missing += [f for f in LIST_FIELDS if not getattr(draft, f)]
    if missing:
        raise AgentOutputError(f"use case block: missing required fields: {', '.join(missing)}")
    return draft


def parse_use_cases(text: str) -> list[UseCaseDraft]:
    """All ```usecase blocks of a response, parsed strictly."""
    blocks = fenced_blocks(text, "usecase")
    if not blocks:
        raise AgentOutputError("response contains no ```usecase block")
    return [_parse_block(b) for b in blocks]


def render_use_case(fields: dict) -> str:
    """Human-readable six-section rendering, in canonical attribute order."""
    lines = [f"Name: {fields['name']}", "Actors:"]
    lines += [f"- {a}" for a in fields["actors"]]
    lines += [f"Description: {fields['description']}", "Preconditions:"]
    lines += [f"- {p}" for p in fields["preconditions"]]
    lines.append("Event flow:")
    lines += [f"{i}. {s}" for i, s in enumerate(fields["event_flow"], start=1)]
    lines.append("Exit conditions:")
    lines += [f"- {c}" for c in fields["exit_conditions"]]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# verdict blocks

_VERDICT_CRITERIA = ("business_context_value", "completeness", "detail_level")


@dataclass(frozen=True)
class RawVerdict:
    scores: dict[str, int]
    missing_business_knowledge: bool
    feedback: str


def parse_verdict(text: str) -> RawVerdict:
    blocks = fenced_blocks(text, "verdict")
    if not blocks:
        raise AgentOutputError("response contains no ```verdict block")
    scores: dict[str, int] = {}
    missing = False
    feedback = ""
    for raw in blocks[0].split("\n"):
        line = raw.strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key = key.strip()
        rest = rest.strip()
        if key in _VERDICT_CRITERIA:
            try:
                value = int(rest)
            except ValueError as exc:
                raise AgentOutputError(f"verdict: non-integer score for {key}: {rest!r}") from exc
            if not 1 <= value <= 5:
                raise AgentOutputError(f"verdict: score out of range for {key}: {value}")
            scores[key] = value
        elif key == "missing_business_knowledge":
            missing = rest.lower() in ("true", "yes", "1")
        elif key == "feedback":
            feedback = rest if rest.lower() != "none" else ""
        else:
            raise AgentOutputError(f"verdict: unknown field {key!r}")
    absent = [c for c in _VERDICT_CRITERIA if c not in scores]
    if absent:
        raise AgentOutputError(f"verdict: missing scores: {', '.join(absent)}")
    return RawVerdict(scores=scores, missing_business_knowledge=missing, feedback=feedback)


# ---------------------------------------------------------------------------
# query blocks


def parse_queries(text: str) -> list[str]:
    blocks = fenced_blocks(text, "queries")
    if not blocks:
        raise AgentOutputError("response contains no ```queries block")
    queries = []
    for raw in blocks[0].split("\n"):
        line = raw.strip()
        if line.startswith("- ") and line[2:].strip():
            queries.append(line[2:].strip())
    return queries
