import pytest

from reqtrace.errors import AgentOutputError
from reqtrace.gateway import Gateway, MockBackend, MockRule
from reqtrace.judge import judge_document


def gateway_with(rules):
    return Gateway(MockBackend(rules), cache_dir=None)


def test_identical_documents_score_five():
    rules = [MockRule("judge", ("IDENTICAL-DOC",), "Score: 5")]
    gateway = gateway_with(rules)
    score = judge_document("IDENTICAL-DOC", "IDENTICAL-DOC", "completeness", gateway)
    assert score == 5


def test_empty_generated_document_scores_one():
    rules = [
        MockRule("judge", ("Generated document:\n\n",), "Score: 1"),
        MockRule("judge", (), "Score: 4"),
    ]
    gateway = gateway_with(rules)
    assert judge_document("", "full reference text", "completeness", gateway) == 1
    assert judge_document("something", "full reference text", "correctness", gateway) == 4


def test_unknown_criterion_rejected(mock_gateway):
    with pytest.raises(ValueError):
        judge_document("a", "b", "speed", mock_gateway)


def test_unparseable_score_retries_once_then_errors():
    backend = MockBackend([])  # echo: no score line
    gateway = Gateway(backend, cache_dir=None)
    with pytest.raises(AgentOutputError, match="no parseable score"):
        judge_document("gen", "ref", "helpfulness", gateway)
    assert len(backend.calls) == 2


def test_retry_parses_second_reply():
    rules = [
        MockRule("judge", ("Reply with exactly one line",), "Score: 3"),
    ]
    backend = MockBackend(rules)
    gateway = Gateway(backend, cache_dir=None)
    assert judge_document("gen", "ref", "helpfulness", gateway) == 3
    assert len(backend.calls) == 2


def test_criterion_definition_lands_in_prompt():
    backend = MockBackend([MockRule("judge", (), "Score: 2")])
    gateway = Gateway(backend, cache_dir=None)
    judge_document("gen", "ref", "helpfulness", gateway)
    prompt = backend.calls[0].rendered_prompt
    assert "purpose, usage context, and design rationale" in prompt
