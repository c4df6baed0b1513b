import random
import shutil
from pathlib import Path

import pytest

from reqtrace.agents import PipelineOptions, run_pipeline
from reqtrace.extract import scan_repository
from reqtrace.gateway import Gateway, MockBackend, MockRule, load_mock_rules
from reqtrace.model import Component, RepositorySnapshot, SourceFile, content_hash
from reqtrace.search import StubSearchBackend, default_stub_backend

REPO_ROOT = Path(__file__).resolve().parent.parent
AUTH_FIXTURE = REPO_ROOT / "fixtures" / "auth"
SMOS_FIXTURE = REPO_ROOT / "fixtures" / "smos"
SMOS_SNAPSHOT = Path(__file__).resolve().parent / "fixtures" / "smos_snapshot.json"
BUNDLED_RULES = REPO_ROOT / "src" / "reqtrace" / "data" / "mock_rules.json"


@pytest.fixture(scope="session")
def bundled_rules():
    return load_mock_rules(BUNDLED_RULES)


@pytest.fixture
def auth_snapshot():
    return scan_repository(AUTH_FIXTURE)


@pytest.fixture
def mock_gateway(bundled_rules):
    return Gateway(MockBackend(bundled_rules), cache_dir=None)


@pytest.fixture
def auth_pipeline(auth_snapshot, mock_gateway):
    return run_pipeline(auth_snapshot, mock_gateway, default_stub_backend(), PipelineOptions())


@pytest.fixture
def auth_workdir(tmp_path):
    """Mutable copy of the auth fixture tree."""
    work = tmp_path / "auth"
    shutil.copytree(AUTH_FIXTURE, work)
    return work


# ---------------------------------------------------------------------------
# generic mock rules: match any repository, responses depend on the prompt


def generic_rules() -> list[MockRule]:
    return [
        MockRule(
            "ir_component",
            (),
            "Implements the behavior of its source unit (build {{prompt_sha8}}).",
        ),
        MockRule(
            "ir_file",
            (),
            "Provides the file-level behavior of its components (build {{prompt_sha8}}).",
        ),
        MockRule("knowledge_gaps", (), "```queries\n```"),
        MockRule(
            "write_ur",
            (),
            "```usecase\n"
            "name: Operate Module Features\n"
            "actors:\n- End User\n"
            "description: The system shall let users exercise the features of this file group (build {{prompt_sha8}}).\n"
            "preconditions:\n- The module is deployed\n"
            "event_flow:\n- The user invokes the module features\n- The system performs the implemented behavior\n"
            "exit_conditions:\n- The requested outcome is produced\n"
            "```",
        ),
        MockRule(
            "verify_ur",
            (),
            "```verdict\nbusiness_context_value: 5\ncompleteness: 5\ndetail_level: 5\n"
            "missing_business_knowledge: false\nfeedback: none\n```",
        ),
    ]


def generic_gateway(cache_dir=None) -> Gateway:
    return Gateway(MockBackend(generic_rules()), cache_dir=cache_dir)


def empty_stub() -> StubSearchBackend:
    return StubSearchBackend(entries=[])


# ---------------------------------------------------------------------------
# seeded random snapshot generator (structural property tests)


def random_snapshot(seed: int, n_components: int = 50, n_files: int = 8) -> RepositorySnapshot:
    rng = random.Random(seed)
    files = [f"pkg{i % 3}/mod{i}.py" for i in range(n_files)]
    comp_ids = []
    owner = {}
    for i in range(n_components):
        path = files[rng.randrange(n_files)]
        cid = f"{path}::unit{i}"
        comp_ids.append(cid)
        owner[cid] = path
    components = []
    for i, cid in enumerate(comp_ids):
        # edges only toward earlier components: snapshots are always acyclic here
        candidates = comp_ids[:i]
        deps = sorted(rng.sample(candidates, k=min(len(candidates), rng.randrange(0, 4))))
        components.append(
            Component(
                id=cid,
                kind="function",
                file_path=owner[cid],
                depends_on=tuple(deps),
                source_code=f"def unit{i}():\n    return {i}\n",
                line_span=(1, 2),
            )
        )
    by_file = {}
    for comp in components:
        by_file.setdefault(comp.file_path, []).append(comp.id)
    source_files = [
        SourceFile(
            path=path,
            language="python",
            content_hash=content_hash(path.encode() + str(seed).encode()),
            component_ids=tuple(sorted(by_file.get(path, ()))),
        )
        for path in files
    ]
    return RepositorySnapshot(
        repo_root=f"/virtual/{seed}",
        revision_label=f"seed-{seed}",
        files=tuple(sorted(source_files, key=lambda f: f.path)),
        components=tuple(sorted(components, key=lambda c: c.id)),
        created_at="2026-01-01T00:00:00+00:00",
    )
