#!/usr/bin/env python3
"""Regenerate golden files from the bundled fixtures.

Run after intentionally changing prompt templates, mock rules, or the
result schema, then review the diff before committing.
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from reqtrace.agents import result_to_dict, run_pipeline  # noqa: E402
from reqtrace.extract import scan_repository  # noqa: E402
from reqtrace.gateway import Gateway, MockBackend, load_mock_rules  # noqa: E402
from reqtrace.model import dump_stable  # noqa: E402
from reqtrace.search import default_stub_backend  # noqa: E402
from reqtrace.trace import record_links, trace_to_dict  # noqa: E402


def main() -> int:
    goldens = ROOT / "tests" / "goldens"
    goldens.mkdir(exist_ok=True)
    rules = load_mock_rules(ROOT / "src" / "reqtrace" / "data" / "mock_rules.json")
    for name in ("auth", "smos"):
        snapshot = scan_repository(ROOT / "fixtures" / name)
        gateway = Gateway(MockBackend(rules), cache_dir=None)
        result = run_pipeline(snapshot, gateway, default_stub_backend())
        doc = result_to_dict(result)
        doc["trace"] = trace_to_dict(record_links(result, snapshot))
        target = goldens / f"{name}_result.json"
        target.write_text(dump_stable(doc), encoding="utf-8")
        print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
