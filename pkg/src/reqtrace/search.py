"""Business-knowledge retrieval: deterministic offline stub and a live backend."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import PreconditionError
from .model import utc_now_iso

logger = logging.getLogger(__name__)

# fixed timestamp keeps stub-backed runs byte-reproducible
STUB_RETRIEVED_AT = "1970-01-01T00:00:00+00:00"


@dataclass(frozen=True)
class KnowledgeItem:
    query: str
    source_label: str
    excerpt: str
    retrieved_at: str


class StubSearchBackend:
    """Fixture-backed search: entries match on a query substring."""

    def __init__(self, entries: list[dict]):
        self.entries = entries

    @classmethod
    def from_file(cls, path: str | Path) -> "StubSearchBackend":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc["entries"])

    def search(self, query: str) -> list[KnowledgeItem]:
        hits = []
        lowered = query.lower()
        for entry in self.entries:
            if entry["match"].lower() in lowered:
                hits.append(
                    KnowledgeItem(
                        query=query,
                        source_label=entry["source_label"],
                        excerpt=entry["excerpt"],
                        retrieved_at=STUB_RETRIEVED_AT,
                    )
                )
        return hits


class LiveSearchBackend:
    """HTTP search endpoint returning a JSON list of {source_label, excerpt}."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0):
        if not endpoint:
            raise PreconditionError("live search requires search.endpoint")
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def search(self, query: str) -> list[KnowledgeItem]:
        resp = requests.get(self.endpoint, params={"q": query}, timeout=self.timeout_s)
        resp.raise_for_status()
        items = []
        for entry in resp.json():
            label = entry.get("source_label") or entry.get("url") or ""
            excerpt = entry.get("excerpt") or entry.get("snippet") or ""
            if label and excerpt:
                items.append(
                    KnowledgeItem(
                        query=query, source_label=label, excerpt=excerpt, retrieved_at=utc_now_iso()
                    )
                )
        return items


def default_stub_backend() -> StubSearchBackend:
    return StubSearchBackend.from_file(Path(__file__).parent / "data" / "search_stub.json")


def search_business_context(query: str, backend, max_items: int = 3) -> list[KnowledgeItem]:
    """At most max_items knowledge items; backend failures degrade to empty."""
    if not query.strip():
        raise PreconditionError("search query must be non-empty")
    try:
        items = backend.search(query)
    except Exception as exc:  # search is best-effort: generation proceeds without it
        logger.warning("search backend unreachable for %r: %s", query, exc)
        return []
    return items[:max_items]
