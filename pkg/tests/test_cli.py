import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import AUTH_FIXTURE
from corpus_utils import make_corpus
from reqtrace.cli import main


def run_cli(*argv, cwd=None):
    """Drive the installed console entry point in-process."""
    import contextlib
    import io
    import os

    stdout, stderr = io.StringIO(), io.StringIO()
    old_cwd = os.getcwd()
    try:
        if cwd:
            os.chdir(cwd)
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            try:
                code = main(list(argv))
            except SystemExit as exc:  # argparse usage errors
                code = exc.code
    finally:
        os.chdir(old_cwd)
    return code, stdout.getvalue(), stderr.getvalue()


def test_config_print_defaults():
    code, out, _ = run_cli("config", "--print-defaults")
    assert code == 0
    assert "[pipeline]" in out
    assert "max_rounds = 3" in out
    assert "approval_floor = 4" in out
    assert 'dir = ".reqtrace-cache"' in out
    assert "theta = 0.5" in out


def test_unknown_subcommand_usage_error():
    code, _, err = run_cli("frobnicate")
    assert code == 2


def test_missing_required_out_flag_names_it():
    code, _, err = run_cli("structure", str(AUTH_FIXTURE))
    assert code == 2
    assert "--out" in err


def test_structure_and_graph_roundtrip(tmp_path):
    snap = tmp_path / "snap.json"
    code, _, err = run_cli("structure", str(AUTH_FIXTURE), "--out", str(snap))
    assert code == 0, err
    graphs = tmp_path / "graphs.json"
    dot = tmp_path / "graphs.dot"
    code, _, err = run_cli("graph", str(snap), "--out", str(graphs), "--dot", str(dot))
    assert code == 0, err
    doc = json.loads(graphs.read_text())
    assert doc["partition"]["community_of"]
    assert doc["condensed_cdg"]["topological_order"]
    assert "digraph" in dot.read_text()


def test_structure_unreadable_root_is_domain_error(tmp_path):
    code, _, err = run_cli("structure", str(tmp_path / "missing"), "--out", str(tmp_path / "s.json"))
    assert code == 1
    assert "error:" in err


def test_pipeline_golden_byte_identity(tmp_path):
    outs = []
    for i in range(3):
        out = tmp_path / f"r{i}.json"
        code, _, err = run_cli(
            "pipeline", str(AUTH_FIXTURE), "--out", str(out), cwd=tmp_path
        )
        assert code == 0, err
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    doc = json.loads(outs[0])
    assert len(doc["communities"]) == 1
    assert doc["trace"]["records"][0]["file_paths"] == [
        "UserLogin.java",
        "UserRegistration.java",
    ]


def test_pipeline_emits_sidecar_files(tmp_path):
    out = tmp_path / "result.json"
    code, _, err = run_cli(
        "pipeline", str(AUTH_FIXTURE),
        "--out", str(out),
        "--snapshot-out", str(tmp_path / "snap.json"),
        "--trace-out", str(tmp_path / "trace.json"),
        "--usage-out", str(tmp_path / "usage.json"),
        "--no-cache",
        cwd=tmp_path,
    )
    assert code == 0, err
    usage = json.loads((tmp_path / "usage.json").read_text())
    assert set(usage["per_phase"]) == {
        "structuring", "ir_component", "ir_file", "search", "write", "verify", "judge"
    }
    assert all("wall_ms" in row for row in usage["per_phase"].values())
    assert json.loads((tmp_path / "trace.json").read_text())["records"]


def test_refresh_cli_round_trip(tmp_path):
    work = tmp_path / "repo"
    shutil.copytree(AUTH_FIXTURE, work)
    code, _, err = run_cli(
        "pipeline", str(work),
        "--out", str(tmp_path / "r1.json"),
        "--snapshot-out", str(tmp_path / "snap1.json"),
        "--trace-out", str(tmp_path / "trace1.json"),
        cwd=tmp_path,
    )
    assert code == 0, err
    target = work / "UserLogin.java"
    target.write_text(target.read_text().replace("String stored", "final String stored"))
    code, _, err = run_cli(
        "refresh", str(work),
        "--prev", str(tmp_path / "snap1.json"),
        "--result", str(tmp_path / "r1.json"),
        "--trace", str(tmp_path / "trace1.json"),
        "--out", str(tmp_path / "r2.json"),
        cwd=tmp_path,
    )
    assert code == 0, err
    assert "1 changed files" in err
    doc = json.loads((tmp_path / "r2.json").read_text())
    assert doc["urs"]


def test_report_renders_sections_and_figures(tmp_path):
    code, _, err = run_cli(
        "pipeline", str(AUTH_FIXTURE),
        "--out", str(tmp_path / "r.json"),
        "--trace-out", str(tmp_path / "t.json"),
        cwd=tmp_path,
    )
    assert code == 0, err
    out = tmp_path / "report.md"
    code, _, err = run_cli(
        "report", "--result", str(tmp_path / "r.json"), "--trace", str(tmp_path / "t.json"),
        "--out", str(out), cwd=tmp_path,
    )
    assert code == 0, err
    text = out.read_text()
    for heading in ("**Actors**", "**Description**", "**Preconditions**",
                    "**Event flow**", "**Exit conditions**", "## Trace appendix"):
        assert heading in text
    order = [text.index(h) for h in ("**Actors**", "**Description**", "**Preconditions**",
                                     "**Event flow**", "**Exit conditions**")]
    assert order == sorted(order)
    assert (tmp_path / "report.json").exists()  # machine-readable sidecar
    assert (tmp_path / "report.communities.png").exists()
    assert (tmp_path / "report.trace.png").exists()


def test_evaluate_and_baseline_commands(tmp_path):
    req_dir, code_dir, links = make_corpus(tmp_path / "gt", n_req=4, n_code=6, n_links=8, seed=3)
    code, _, err = run_cli(
        "pipeline", str(AUTH_FIXTURE), "--out", str(tmp_path / "r.json"), cwd=tmp_path
    )
    assert code == 0, err

    out = tmp_path / "eval.json"
    code, _, err = run_cli(
        "evaluate",
        "--gen", str(tmp_path / "r.json"),
        "--gt-req", str(req_dir),
        "--gt-code", str(code_dir),
        "--gt-links", str(links),
        "--out", str(out),
        "--rank-k", "3",
        cwd=tmp_path,
    )
    assert code == 0, err
    doc = json.loads(out.read_text())
    assert doc["dataset_counts"] == {"requirements": 4, "code": 6, "links": 8}
    assert "precision" in doc["ur_set_metrics"]
    assert "f1" in doc["link_metrics"]
    assert doc["baselines"]["vsm"]["curve"]
    assert doc["theta"] == 0.5
    assert (tmp_path / "eval.vsm_sweep.tsv").exists()
    assert (tmp_path / "eval.vsm_sweep.png").exists()
    assert (tmp_path / "eval.lsi_sweep.png").exists()

    out = tmp_path / "vsm.json"
    code, _, err = run_cli(
        "baseline", "vsm",
        "--req", str(req_dir), "--code", str(code_dir), "--gt-links", str(links),
        "--out", str(out), cwd=tmp_path,
    )
    assert code == 0, err
    doc = json.loads(out.read_text())
    assert doc["sweep"]["best_f1"] == max(p["f1"] for p in doc["sweep"]["curve"])
    assert len(doc["similarity_matrix"]["rows"]) == 4
    assert (tmp_path / "vsm.sweep.tsv").read_text().startswith("cutoff\tprecision")

    out = tmp_path / "lsi.json"
    code, _, err = run_cli(
        "baseline", "lsi",
        "--req", str(req_dir), "--code", str(code_dir), "--gt-links", str(links),
        "--out", str(out), "--rank-k", "4", cwd=tmp_path,
    )
    assert code == 0, err
    assert json.loads(out.read_text())["rank_k"] == 4


def test_evaluate_with_mock_judge(tmp_path):
    req_dir, code_dir, links = make_corpus(tmp_path / "gt", n_req=3, n_code=4, n_links=4, seed=9)
    run_cli("pipeline", str(AUTH_FIXTURE), "--out", str(tmp_path / "r.json"), cwd=tmp_path)
    rules = tmp_path / "judge_rules.json"
    rules.write_text(json.dumps({"rules": [{"template_id": "judge", "contains": [], "response": "Score: 4"}]}))
    out = tmp_path / "eval.json"
    code, _, err = run_cli(
        "evaluate",
        "--gen", str(tmp_path / "r.json"),
        "--gt-req", str(req_dir), "--gt-code", str(code_dir), "--gt-links", str(links),
        "--out", str(out), "--judge", "--mock-rules", str(rules), "--no-figures",
        cwd=tmp_path,
    )
    assert code == 0, err
    doc = json.loads(out.read_text())
    assert doc["judge_scores"] == {"completeness": 4, "correctness": 4, "helpfulness": 4}


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "reqtrace.cli", "--version"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "reqtrace" in proc.stdout


def test_pipeline_matches_frozen_golden(tmp_path):
    """Byte-for-byte comparison against the golden frozen from the first
    verified run; regenerate deliberately via scripts/regen_goldens.py."""
    golden = Path(__file__).resolve().parent / "goldens" / "auth_result.json"
    out = tmp_path / "r.json"
    code, _, err = run_cli("pipeline", str(AUTH_FIXTURE), "--out", str(out),
                           "--no-cache", cwd=tmp_path)
    assert code == 0, err
    assert out.read_bytes() == golden.read_bytes()


def test_smos_pipeline_matches_frozen_golden(tmp_path):
    from conftest import SMOS_FIXTURE

    golden = Path(__file__).resolve().parent / "goldens" / "smos_result.json"
    out = tmp_path / "r.json"
    code, _, err = run_cli("pipeline", str(SMOS_FIXTURE), "--out", str(out),
                           "--no-cache", cwd=tmp_path)
    assert code == 0, err
    assert out.read_bytes() == golden.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ("structure",),                       # missing positional and --out
        ("graph", "snap.json"),               # missing --out
        ("pipeline", "root"),                 # missing --out
        ("refresh", "root", "--out", "x"),    # missing --prev/--result/--trace
        ("evaluate", "--gen", "r.json"),      # missing gt paths and --out
        ("baseline", "vsm", "--req", "a"),    # missing --code/--gt-links/--out
        ("report", "--result", "r.json"),     # missing --out
        ("baseline", "nope", "--req", "a", "--code", "b", "--gt-links", "c", "--out", "d"),
    ],
)
def test_usage_errors_exit_2(argv, tmp_path):
    code, _, _ = run_cli(*argv, cwd=tmp_path)
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ("graph", "missing-snapshot.json", "--out", "g.json"),
        ("report", "--result", "missing-result.json", "--out", "r.md"),
        ("evaluate", "--gen", "missing.json", "--gt-req", "x", "--gt-code", "y",
         "--gt-links", "z", "--out", "e.json"),
        ("baseline", "vsm", "--req", "nodir", "--code", "nodir", "--gt-links", "nolinks",
         "--out", "b.json"),
        ("refresh", "nowhere", "--prev", "p.json", "--result", "r.json",
         "--trace", "t.json", "--out", "o.json"),
    ],
)
def test_domain_errors_exit_1(argv, tmp_path):
    code, _, err = run_cli(*argv, cwd=tmp_path)
    assert code == 1
    assert "error:" in err


def test_config_file_and_unknown_key_rejection(tmp_path):
    good = tmp_path / "run.toml"
    good.write_text("[pipeline]\nmax_rounds = 5\n")
    code, out, _ = run_cli("config", "--config", str(good))
    assert code == 0
    assert json.loads(out)["pipeline"]["max_rounds"] == 5

    bad = tmp_path / "bad.toml"
    bad.write_text("[pipeline]\nmax_round = 5\n")
    code, _, err = run_cli("config", "--config", str(bad))
    assert code == 1
    assert "unknown config key" in err
