"""Chat-completion gateway: backends, response cache, token/time accounting.

Every completion flows through Gateway.complete, which consults an
on-disk cache keyed by (model, template, rendered prompt) and records a
per-call ledger entry. The mock backend is the determinism substrate
for tests and golden files: canned responses, whitespace token counts,
and simulated wall times that depend only on the request.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

import requests

from .errors import PreconditionError, ProtocolError, TransportError

PHASES = ("structuring", "ir_component", "ir_file", "search", "write", "verify", "judge")


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    template_id: str
    rendered_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 1024


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    output_tokens: int
    wall_ms: int
    cache_hit: bool = False


@dataclass(frozen=True)
class PhaseUsage:
    calls: int = 0
    prompt_tokens: int = 0
    output_tokens: int = 0
    wall_ms: int = 0

    def plus(self, result: CompletionResult) -> "PhaseUsage":
        return PhaseUsage(
            calls=self.calls + 1,
            prompt_tokens=self.prompt_tokens + result.prompt_tokens,
            output_tokens=self.output_tokens + result.output_tokens,
            wall_ms=self.wall_ms + result.wall_ms,
        )


@dataclass(frozen=True)
class UsageReport:
    per_phase: dict[str, PhaseUsage]
    totals: PhaseUsage

    def to_dict(self, include_wall: bool = True) -> dict:
        def row(u: PhaseUsage) -> dict:
            d = {"calls": u.calls, "prompt_tokens": u.prompt_tokens, "output_tokens": u.output_tokens}
            if include_wall:
                d["wall_ms"] = u.wall_ms
            return d

        return {"per_phase": {p: row(u) for p, u in self.per_phase.items()}, "totals": row(self.totals)}


class Session:
    """Per-run accounting: an append-only ledger of every completion issued."""

    def __init__(self):
        self._lock = threading.Lock()
        self.entries: list[tuple[str, CompletionResult]] = []

    def record(self, phase: str, result: CompletionResult) -> None:
        if phase not in PHASES:
            raise ValueError(f"unknown phase: {phase}")
        with self._lock:
            self.entries.append((phase, result))

    def usage_report(self) -> UsageReport:
        per_phase = {p: PhaseUsage() for p in PHASES}
        totals = PhaseUsage()
        with self._lock:
            for phase, result in self.entries:
                per_phase[phase] = per_phase[phase].plus(result)
                totals = totals.plus(result)
        return UsageReport(per_phase=per_phase, totals=totals)


def cache_key(request: CompletionRequest) -> str:
    payload = "\x00".join((request.model_id, request.template_id, request.rendered_prompt))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def whitespace_tokens(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class MockRule:
    template_id: str  # "*" matches any template
    contains: tuple[str, ...]
    response: str

    def matches(self, request: CompletionRequest) -> bool:
        if self.template_id not in ("*", request.template_id):
            return False
        return all(sub in request.rendered_prompt for sub in self.contains)


def load_mock_rules(path: str | Path) -> list[MockRule]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        MockRule(
            template_id=entry.get("template_id", "*"),
            contains=tuple(entry.get("contains", [])),
            response=entry["response"],
        )
        for entry in doc["rules"]
    ]


class MockBackend:
    """Deterministic rule-table backend.

    First matching rule wins. The canned response may embed the
    placeholder ``{{prompt_sha8}}``, replaced by an 8-hex digest of the
    rendered prompt, so responses can be made input-sensitive. Unmatched
    prompts produce a diagnostic echo so they surface in golden files.
    """

    def __init__(self, rules: list[MockRule] | None = None):
        self.rules = list(rules or [])
        self.calls: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> CompletionResult:
        self.calls.append(request)
        sha8 = hashlib.sha256(request.rendered_prompt.encode("utf-8")).hexdigest()[:8]
        text = None
        for rule in self.rules:
            if rule.matches(request):
                text = rule.response.replace("{{prompt_sha8}}", sha8)
                break
        if text is None:
            text = f"MOCK-ECHO template={request.template_id} prompt-sha={sha8}"
        out_tokens = whitespace_tokens(text)
        return CompletionResult(
            text=text,
            prompt_tokens=whitespace_tokens(request.rendered_prompt),
            output_tokens=out_tokens,
            wall_ms=3 + out_tokens,  # simulated latency: deterministic per request
        )


class HttpBackend:
    """Chat-completion wire protocol: message-list in, choice-list out."""

    def __init__(self, endpoint: str, api_key: str = "", timeout_s: float = 120.0):
        if not endpoint:
            raise PreconditionError("live backend requires llm.endpoint")
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout_s = timeout_s

    def complete(self, request: CompletionRequest) -> CompletionResult:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.perf_counter()
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout_s)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(f"completion request failed: {exc}") from exc
        wall_ms = int((time.perf_counter() - started) * 1000)
        try:
            doc = resp.json()
            text = doc["choices"][0]["message"]["content"]
            usage = doc.get("usage", {})
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            excerpt = resp.text[:200]
            raise ProtocolError(f"malformed backend reply ({exc}): {excerpt}") from exc
        return CompletionResult(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", whitespace_tokens(request.rendered_prompt))),
            output_tokens=int(usage.get("completion_tokens", whitespace_tokens(text))),
            wall_ms=wall_ms,
        )


class Gateway:
    """Caching, retrying front door for a completion backend."""

    def __init__(
        self,
        backend,
        cache_dir: str | Path | None = None,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        session: Session | None = None,
    ):
        self.backend = backend
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.session = session or Session()
        self._lock = threading.Lock()

    def _cache_path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def _cache_get(self, key: str) -> CompletionResult | None:
        if self.cache_dir is None:
            return None
        path = self._cache_path(key)
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        return CompletionResult(
            text=doc["text"],
            prompt_tokens=doc["prompt_tokens"],
            output_tokens=doc["output_tokens"],
            wall_ms=doc["wall_ms"],
            cache_hit=False,
        )

    def _cache_put(self, key: str, request: CompletionRequest, result: CompletionResult) -> None:
        if self.cache_dir is None:
            return
        with self._lock:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            record = {
                "model_id": request.model_id,
                "template_id": request.template_id,
                "text": result.text,
                "prompt_tokens": result.prompt_tokens,
                "output_tokens": result.output_tokens,
                "wall_ms": result.wall_ms,
            }
            self._cache_path(key).write_text(
                json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
            with (self.cache_dir / "ledger.jsonl").open("a", encoding="utf-8") as ledger:
                ledger.write(json.dumps({"key": key, "model_id": request.model_id}) + "\n")

    def complete(self, request: CompletionRequest, phase: str = "structuring") -> CompletionResult:
        if not request.rendered_prompt.strip():
            raise PreconditionError("rendered_prompt must be non-empty")
        if request.temperature < 0:
            raise PreconditionError("temperature must be >= 0")
        key = cache_key(request)
        started = time.perf_counter()
        cached = self._cache_get(key)
        if cached is not None:
            # token counts replay from the record; wall time is lookup only
            lookup_ms = int((time.perf_counter() - started) * 1000)
            result = replace(cached, cache_hit=True, wall_ms=lookup_ms)
            self.session.record(phase, result)
            return result
        attempt = 0
        while True:
            try:
                result = self.backend.complete(request)
                break
            except TransportError:
                attempt += 1
                if attempt > self.max_retries:
                    raise
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
        self._cache_put(key, request, result)
        self.session.record(phase, result)
        return result

    def usage_report(self) -> UsageReport:
        return self.session.usage_report()
