"""Document-level judging of a generated requirements document."""

from __future__ import annotations

import re

from . import prompts
from .errors import AgentOutputError
from .gateway import CompletionRequest, Gateway

CRITERION_DEFINITIONS = {
    "completeness": (
        "Completeness: the generated requirements document covers every "
        "requirement present in the reference document."
    ),
    "correctness": (
        "Correctness: the generated requirements document does not hallucinate; "
        "everything it claims is grounded in the reference or the code."
    ),
    "helpfulness": (
        "Helpfulness: the generated requirements document goes beyond restating "
        "code elements and explains purpose, usage context, and design rationale."
    ),
}

_SCORE_RE = re.compile(r"score\s*:\s*([1-5])\b", re.IGNORECASE)


def _parse_score(text: str) -> int | None:
    match = _SCORE_RE.search(text)
    if match:
        return int(match.group(1))
    alone = re.fullmatch(r"\s*([1-5])\s*", text)
    return int(alone.group(1)) if alone else None


def judge_document(
    generated_doc: str,
    reference_doc: str,
    criterion: str,
    gateway: Gateway,
    model_id: str = "mock-1",
) -> int:
    """Integer 1..5 score for one criterion; one reformat retry, then error."""
    if criterion not in CRITERION_DEFINITIONS:
        raise ValueError(f"unknown criterion: {criterion}")
    prompt = prompts.render(
        "judge",
        criterion=criterion,
        criterion_definition=CRITERION_DEFINITIONS[criterion],
        generated=generated_doc,
        reference=reference_doc,
    )
    result = gateway.complete(CompletionRequest(model_id, "judge", prompt), phase="judge")
    score = _parse_score(result.text)
    if score is None:
        retry = prompt + "\n\nReply with exactly one line: Score: <1-5>"
        result = gateway.complete(CompletionRequest(model_id, "judge", retry), phase="judge")
        score = _parse_score(result.text)
    if score is None:
        raise AgentOutputError(f"judge reply carries no parseable score: {result.text[:120]!r}")
    return score
