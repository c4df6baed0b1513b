"""Requirement-set metrics and group-based trace-link metrics.

Set metrics realize the set-intersection reading of precision/recall: a
greedy one-to-one matching between generated and ground-truth
requirements stands in for the intersection. Link metrics follow the
group-based correctness rule: a generated link is correct when some
ground-truth code group overlaps its code set with Jaccard >= theta.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import PreconditionError
from .gateway import CompletionRequest
from . import prompts

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class EvalConfig:
    theta: float = 0.5
    ur_match_threshold: float = 0.5
    matcher: str = "lexical"  # "lexical" | "llm_judge"
    sweep_step: float = 0.01

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must be in (0, 1]")


@dataclass(frozen=True)
class LinkMetrics:
    precision: float
    recall: float
    f1: float
    correct_count: int
    gen_count: int
    gt_count: int
    covered_gt_recall: float  # non-paper supplement: distinct gt groups covered
    recall_exceeds_one: bool

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "correct_count": self.correct_count,
            "gen_count": self.gen_count,
            "gt_count": self.gt_count,
            "covered_gt_recall": self.covered_gt_recall,
            "recall_exceeds_one": self.recall_exceeds_one,
        }


def normalize_tokens(text: str) -> frozenset[str]:
    """Lowercased, punctuation-stripped token set."""
    return frozenset(_WORD_RE.findall(text.lower()))


def token_set_f1(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    overlap = len(a & b)
    if overlap == 0:
        return 0.0
    return 2.0 * overlap / (len(a) + len(b))


def _pair_text(item) -> str:
    # UserRequirement or (id, text) tuple
    if hasattr(item, "name"):
        return f"{item.name} {item.description}"
    return item[1]


def _pair_id(item) -> str:
    if hasattr(item, "ur_id"):
        return item.ur_id
    return item[0]


def match_ur_sets(
    gen: list, gt: list[tuple[str, str]], config: EvalConfig, gateway=None, model_id: str = "mock-1"
) -> list[tuple[str, str, float]]:
    """Greedy one-to-one matching by descending similarity.

    Returns (gen_id, gt_id, similarity) triples. The lexical matcher
    pairs items whose token-set F1 over name+description reaches the
    threshold; the llm_judge matcher asks the backend to confirm each
    candidate pair, still in descending lexical order.
    """
    gen_tokens = [normalize_tokens(_pair_text(g)) for g in gen]
    gt_tokens = [normalize_tokens(text) for _, text in gt]
    scored = []
    for i in range(len(gen)):
        for j in range(len(gt)):
            sim = token_set_f1(gen_tokens[i], gt_tokens[j])
            scored.append((-sim, i, j))
    scored.sort()

    use_judge = config.matcher == "llm_judge"
    if use_judge and gateway is None:
        raise PreconditionError("llm_judge matcher requires a gateway")

    matched: list[tuple[str, str, float]] = []
    gen_used: set[int] = set()
    gt_used: set[int] = set()
    for neg_sim, i, j in scored:
        sim = -neg_sim
        if i in gen_used or j in gt_used:
            continue
        if use_judge:
            if sim == 0.0:
                continue  # no lexical evidence at all; skip the backend call
            prompt = prompts.render(
                "ur_match", requirement_a=_pair_text(gen[i]), requirement_b=gt[j][1]
            )
            reply = gateway.complete(
                CompletionRequest(model_id, "ur_match", prompt), phase="judge"
            )
            accept = "yes" in reply.text.lower().split("match:")[-1]
        else:
            accept = sim >= config.ur_match_threshold
        if accept:
            gen_used.add(i)
            gt_used.add(j)
            matched.append((_pair_id(gen[i]), gt[j][0], sim))
    return matched


def ur_set_metrics(matching_count: int, gen_count: int, gt_count: int) -> tuple[float, float, float]:
    """Precision, recall, F1 of the matched-requirement counts."""
    precision = matching_count / gen_count if gen_count else 0.0
    recall = matching_count / gt_count if gt_count else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def jaccard(a: set, b: set) -> float:
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def link_correctness(c_gen: set, gt_groups: list[set], theta: float) -> bool:
    """True when some ground-truth group overlaps c_gen with Jaccard >= theta."""
    if not c_gen:
        raise PreconditionError("generated code set must be non-empty")
    return any(jaccard(set(c_gen), set(group)) >= theta for group in gt_groups)


def link_metrics(
    gen_links: list[tuple[str, set]],
    gt_groups: dict[str, set] | list[set],
    theta: float,
) -> LinkMetrics:
    """Group-based precision/recall/F1 over generated links.

    The recall denominator is the ground-truth group count and the
    numerator reuses the correct generated-link count, exactly as the
    formula is stated; recall above 1 is possible and flagged.
    """
    groups = list(gt_groups.values()) if isinstance(gt_groups, dict) else list(gt_groups)
    groups = [set(g) for g in groups]
    correct = 0
    covered: set[int] = set()
    for _, c_gen in gen_links:
        c_gen = set(c_gen)
        if not c_gen:
            continue
        hit = False
        for idx, group in enumerate(groups):
            if jaccard(c_gen, group) >= theta:
                covered.add(idx)
                hit = True
        if hit:
            correct += 1
    gen_count = len(gen_links)
    gt_count = len(groups)
    precision = correct / gen_count if gen_count else 0.0
    recall = correct / gt_count if gt_count else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return LinkMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        correct_count=correct,
        gen_count=gen_count,
        gt_count=gt_count,
        covered_gt_recall=len(covered) / gt_count if gt_count else 0.0,
        recall_exceeds_one=recall > 1.0,
    )
