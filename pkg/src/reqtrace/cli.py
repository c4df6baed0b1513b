"""Command-line entry point: structure, graph, pipeline, refresh, evaluate,
baseline, report, config."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .agents import PipelineOptions, read_result, result_to_dict, run_pipeline
from .baselines import lsi_rank, sweep_threshold, vsm_rank
from .coest import load_coest_dataset
from .config import RunConfig, load_config, print_defaults
from .errors import PipelineFailure, ReqtraceError
from .extract import ExtractionConfig, scan_repository
from .gateway import Gateway, HttpBackend, MockBackend, load_mock_rules
from .graphs import build_cdg, build_fdg, condense_to_dag, graph_to_dict, to_dot, topological_order
from .judge import judge_document
from .leiden import capped_partition
from .metrics import EvalConfig, link_metrics, match_ur_sets, ur_set_metrics
from .model import SCHEMA_VERSION, dump_stable, read_snapshot, write_snapshot
from .report import (
    render_report_markdown,
    report_sidecar,
    save_community_sizes_figure,
    save_sweep_curve_figure,
    save_trace_matrix_figure,
    write_sweep_curve_tsv,
)
from .search import LiveSearchBackend, StubSearchBackend, default_stub_backend
from .trace import invalidate, read_trace, record_links, refresh, trace_to_dict, write_trace

DEFAULT_MOCK_RULES = Path(__file__).parent / "data" / "mock_rules.json"


def _extraction_config(args) -> ExtractionConfig:
    return ExtractionConfig(
        include_globs=tuple(args.include or ()),
        exclude_globs=tuple(args.exclude or ()),
        languages=tuple(args.languages.split(",")),
        max_file_bytes=args.max_file_bytes,
    )


def _add_extraction_flags(parser) -> None:
    parser.add_argument("--include", action="append", metavar="GLOB", help="include glob (repeatable)")
    parser.add_argument("--exclude", action="append", metavar="GLOB", help="exclude glob (repeatable)")
    parser.add_argument("--languages", default="java,python")
    parser.add_argument("--max-file-bytes", type=int, default=1_048_576)
    parser.add_argument("--revision", default=None, help="revision label (default: content digest)")


def _add_backend_flags(parser) -> None:
    parser.add_argument("--config", default=None, help="TOML run configuration")
    parser.add_argument("--backend", choices=("mock", "live"), default="mock")
    parser.add_argument("--mock-rules", default=None, help="mock rule table JSON (default: bundled)")
    parser.add_argument("--search-stub", default=None, help="stub search fixture JSON")
    parser.add_argument("--cache-dir", default=None, help="override cache.dir")
    parser.add_argument("--no-cache", action="store_true", help="disable the response cache")


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "cache_dir", None):
        overrides[("cache", "dir")] = args.cache_dir
    return cfg.with_overrides(overrides) if overrides else cfg


def _pipeline_options(cfg: RunConfig, backend_kind: str) -> PipelineOptions:
    return PipelineOptions(
        model_id=str(cfg.get("llm", "model")),
        max_rounds=int(cfg.get("pipeline", "max_rounds")),
        approval_floor=int(cfg.get("pipeline", "approval_floor")),
        max_urs_per_community=int(cfg.get("pipeline", "max_urs_per_community")),
        verifier_code_chars=int(cfg.get("pipeline", "verifier_code_chars")),
        max_prompt_chars=int(cfg.get("pipeline", "max_prompt_chars")),
        max_knowledge_items=int(cfg.get("search", "max_knowledge_items")),
        leiden_resolution=float(cfg.get("leiden", "resolution")),
        leiden_seed=int(cfg.get("leiden", "seed")),
        max_community_files=int(cfg.get("community", "max_files")),
    )


def _make_gateway(args, cfg: RunConfig) -> Gateway:
    if args.backend == "mock":
        rules = load_mock_rules(args.mock_rules or DEFAULT_MOCK_RULES)
        backend = MockBackend(rules)
    else:
        backend = HttpBackend(
            endpoint=str(cfg.get("llm", "endpoint")),
            api_key=os.environ.get("REQTRACE_API_KEY", ""),
        )
    cache_dir = None if args.no_cache else str(cfg.get("cache", "dir"))
    return Gateway(backend, cache_dir=cache_dir, max_retries=int(cfg.get("llm", "max_retries")))


def _make_search_backend(args, cfg: RunConfig):
    if args.search_stub:
        return StubSearchBackend.from_file(args.search_stub)
    if str(cfg.get("search", "backend")) == "live":
        return LiveSearchBackend(endpoint=str(cfg.get("search", "endpoint")))
    return default_stub_backend()


# ---------------------------------------------------------------------------
# subcommands


def cmd_structure(args) -> int:
    snapshot = scan_repository(args.root, _extraction_config(args), revision_label=args.revision)
    write_snapshot(snapshot, args.out)
    print(f"wrote snapshot: {args.out} ({len(snapshot.files)} files, "
          f"{len(snapshot.components)} components)", file=sys.stderr)
    return 0


def cmd_graph(args) -> int:
    snapshot = read_snapshot(args.snapshot)
    cdg = build_cdg(snapshot)
    fdg = build_fdg(snapshot, cdg)
    condensed_cdg = condense_to_dag(cdg)
    condensed_fdg = condense_to_dag(fdg)
    partition = capped_partition(fdg, args.resolution, args.seed, args.max_community_files)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "cdg": graph_to_dict(cdg),
        "fdg": graph_to_dict(fdg),
        "condensed_cdg": {
            "dag": graph_to_dict(condensed_cdg.dag),
            "removed_edges": [list(e) for e in condensed_cdg.removed_edges],
            "topological_order": topological_order(condensed_cdg.dag),
        },
        "condensed_fdg": {
            "dag": graph_to_dict(condensed_fdg.dag),
            "removed_edges": [list(e) for e in condensed_fdg.removed_edges],
            "topological_order": topological_order(condensed_fdg.dag),
        },
        "partition": {
            "community_of": partition.community_of,
            "resolution": partition.resolution,
            "seed": partition.seed,
        },
    }
    Path(args.out).write_text(dump_stable(doc), encoding="utf-8")
    if args.dot:
        Path(args.dot).write_text(to_dot({"cdg": cdg, "fdg": fdg}), encoding="utf-8")
    print(f"wrote graphs: {args.out}", file=sys.stderr)
    return 0


def _write_pipeline_outputs(args, snapshot, result, cfg) -> None:
    trace = record_links(result, snapshot)
    doc = result_to_dict(result)
    doc["trace"] = trace_to_dict(trace)
    Path(args.out).write_text(dump_stable(doc), encoding="utf-8")
    if args.snapshot_out:
        write_snapshot(snapshot, args.snapshot_out)
    if args.trace_out:
        write_trace(trace, args.trace_out)
    if args.usage_out:
        Path(args.usage_out).write_text(
            dump_stable(result.usage.to_dict(include_wall=True)), encoding="utf-8"
        )


def cmd_pipeline(args) -> int:
    cfg = _load_run_config(args)
    snapshot = scan_repository(args.root, _extraction_config(args), revision_label=args.revision)
    gateway = _make_gateway(args, cfg)
    search_backend = _make_search_backend(args, cfg)
    options = _pipeline_options(cfg, args.backend)
    try:
        result = run_pipeline(snapshot, gateway, search_backend, options)
    except PipelineFailure as exc:
        if exc.partial is not None:
            partial_path = Path(args.out).with_suffix(".partial.json")
            partial_path.write_text(dump_stable(result_to_dict(exc.partial)), encoding="utf-8")
            print(f"partial result persisted: {partial_path}", file=sys.stderr)
        raise
    _write_pipeline_outputs(args, snapshot, result, cfg)
    approved = sum(1 for v in result.verdicts.values() if v.approved)
    print(
        f"pipeline complete: {len(result.communities)} communities, "
        f"{len(result.urs)} URs ({approved} approved), "
        f"{result.usage.totals.calls} backend calls",
        file=sys.stderr,
    )
    return 0


def cmd_refresh(args) -> int:
    cfg = _load_run_config(args)
    old_snapshot = read_snapshot(args.prev)
    prior_result = read_result(args.result)
    trace = read_trace(args.trace)
    new_snapshot = scan_repository(args.root, _extraction_config(args), revision_label=args.revision)
    stale = invalidate(trace, old_snapshot, new_snapshot)
    gateway = _make_gateway(args, cfg)
    search_backend = _make_search_backend(args, cfg)
    options = _pipeline_options(cfg, args.backend)
    result, new_trace, delta = refresh(
        prior_result, stale, new_snapshot, gateway, search_backend, options
    )
    doc = result_to_dict(result)
    doc["trace"] = trace_to_dict(new_trace)
    Path(args.out).write_text(dump_stable(doc), encoding="utf-8")
    if args.snapshot_out:
        write_snapshot(new_snapshot, args.snapshot_out)
    if args.trace_out:
        write_trace(new_trace, args.trace_out)
    print(
        f"refresh complete: {len(stale.changed_files)} changed files, "
        f"{len(delta.rederived_component_irs)} component IRs, "
        f"{len(delta.rederived_file_irs)} file IRs, "
        f"{len(delta.regenerated_communities)} communities regenerated",
        file=sys.stderr,
    )
    return 0


def _gen_links_from_result(result, granularity: str) -> list[tuple[str, set]]:
    links = []
    for ur in sorted(result.urs, key=lambda u: u.ur_id):
        if granularity == "component":
            code_ids = set()
            for ir_id in result.component_irs:
                path = ir_id.split("::", 1)[0]
                if path in ur.source_file_paths:
                    code_ids.add(ir_id)
        else:
            code_ids = {Path(p).stem for p in ur.source_file_paths}
        links.append((ur.ur_id, code_ids))
    return links


def cmd_evaluate(args) -> int:
    result = read_result(args.gen)
    dataset = load_coest_dataset(args.gt_req, args.gt_code, args.gt_links)
    eval_config = EvalConfig(
        theta=args.theta,
        ur_match_threshold=args.ur_match_threshold,
        matcher=args.matcher,
        sweep_step=args.sweep_step,
    )

    gen_urs = sorted(result.urs, key=lambda u: u.ur_id)
    matching = match_ur_sets(gen_urs, list(dataset.requirements), eval_config)
    precision, recall, f1 = ur_set_metrics(len(matching), len(gen_urs), len(dataset.requirements))

    gt_groups = dataset.gt_groups()
    gen_links = _gen_links_from_result(result, args.granularity)
    gen_links = [(ur_id, ids) for ur_id, ids in gen_links if ids]
    links = link_metrics(gen_links, gt_groups, args.theta)

    req_texts = [text for _, text in dataset.requirements]
    code_texts = [text for _, text in dataset.code_docs]
    req_index = {rid: i for i, (rid, _) in enumerate(dataset.requirements)}
    code_index = {cid: j for j, (cid, _) in enumerate(dataset.code_docs)}
    gt_pairs = {(req_index[r], code_index[c]) for r, c in dataset.links}
    vsm = vsm_rank(req_texts, code_texts)
    vsm_sweep = sweep_threshold(vsm, gt_pairs, args.sweep_step)
    rank_k = min(args.rank_k, len(req_texts) + len(code_texts))
    lsi = lsi_rank(req_texts, code_texts, rank_k)
    lsi_sweep = sweep_threshold(lsi, gt_pairs, args.sweep_step)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "dataset_counts": dict(zip(("requirements", "code", "links"), dataset.counts())),
        "ur_set_metrics": {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "matched": len(matching),
            "gen_count": len(gen_urs),
            "gt_count": len(dataset.requirements),
            "pairs": [{"gen": g, "gt": t, "similarity": s} for g, t, s in matching],
        },
        "link_metrics": links.to_dict(),
        "baselines": {
            "vsm": vsm_sweep.to_dict(),
            "lsi": {**lsi_sweep.to_dict(), "rank_k": rank_k},
        },
        "usage": result.usage.to_dict(include_wall=True),
        "theta": args.theta,
    }

    if args.judge:
        cfg = _load_run_config(args)
        gateway = _make_gateway(args, cfg)
        generated_doc = "\n\n".join(
            f"{ur.name}: {ur.description}" for ur in gen_urs
        )
        reference_doc = "\n\n".join(text for _, text in dataset.requirements)
        doc["judge_scores"] = {
            criterion: judge_document(generated_doc, reference_doc, criterion, gateway,
                                      model_id=str(cfg.get("llm", "model")))
            for criterion in ("completeness", "correctness", "helpfulness")
        }

    out = Path(args.out)
    out.write_text(dump_stable(doc), encoding="utf-8")
    if not args.no_figures:
        save_sweep_curve_figure(vsm_sweep.curve, vsm_sweep.best_cutoff, out.with_suffix(".vsm_sweep.png"))
        save_sweep_curve_figure(lsi_sweep.curve, lsi_sweep.best_cutoff, out.with_suffix(".lsi_sweep.png"))
    write_sweep_curve_tsv(vsm_sweep.curve, out.with_suffix(".vsm_sweep.tsv"))
    write_sweep_curve_tsv(lsi_sweep.curve, out.with_suffix(".lsi_sweep.tsv"))
    print(
        f"evaluation written: {args.out} "
        f"(UR F1 {f1:.3f}, link F1 {links.f1:.3f}, VSM best F1 {vsm_sweep.best_f1:.3f})",
        file=sys.stderr,
    )
    return 0


def cmd_baseline(args) -> int:
    dataset = load_coest_dataset(args.req, args.code, args.gt_links)
    req_texts = [text for _, text in dataset.requirements]
    code_texts = [text for _, text in dataset.code_docs]
    req_index = {rid: i for i, (rid, _) in enumerate(dataset.requirements)}
    code_index = {cid: j for j, (cid, _) in enumerate(dataset.code_docs)}
    gt_pairs = {(req_index[r], code_index[c]) for r, c in dataset.links}

    if args.method == "vsm":
        matrix = vsm_rank(req_texts, code_texts)
        extra = {}
    else:
        rank_k = min(args.rank_k, len(req_texts) + len(code_texts))
        matrix = lsi_rank(req_texts, code_texts, rank_k)
        extra = {"rank_k": rank_k}
    sweep = sweep_threshold(matrix, gt_pairs, args.sweep_step)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": args.method,
        "dataset_counts": dict(zip(("requirements", "code", "links"), dataset.counts())),
        "sweep": sweep.to_dict(),
        "similarity_matrix": {
            "requirements": [rid for rid, _ in dataset.requirements],
            "code": [cid for cid, _ in dataset.code_docs],
            "rows": [[round(float(v), 9) for v in row] for row in matrix],
        },
        **extra,
    }
    out = Path(args.out)
    out.write_text(dump_stable(doc), encoding="utf-8")
    write_sweep_curve_tsv(sweep.curve, out.with_suffix(".sweep.tsv"))
    if not args.no_figures:
        save_sweep_curve_figure(sweep.curve, sweep.best_cutoff, out.with_suffix(".sweep.png"))
    print(
        f"{args.method} baseline: best F1 {sweep.best_f1:.3f} at cutoff {sweep.best_cutoff:.2f}",
        file=sys.stderr,
    )
    return 0


def cmd_report(args) -> int:
    result = read_result(args.result)
    trace = read_trace(args.trace) if args.trace else None
    out = Path(args.out)
    out.write_text(render_report_markdown(result, trace), encoding="utf-8")
    sidecar = out.with_suffix(".json")
    sidecar.write_text(dump_stable(report_sidecar(result, trace)), encoding="utf-8")
    if not args.no_figures:
        save_community_sizes_figure(result, out.with_suffix(".communities.png"))
        if trace is not None and trace.records:
            save_trace_matrix_figure(result, trace, out.with_suffix(".trace.png"))
    print(f"report written: {args.out}", file=sys.stderr)
    return 0


def cmd_config(args) -> int:
    if args.print_defaults:
        sys.stdout.write(print_defaults())
        return 0
    cfg = load_config(args.config)
    sys.stdout.write(dump_stable(cfg.as_dict()))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reqtrace",
        description="Recover user-level requirements and live trace links from a repository.",
    )
    parser.add_argument("--version", action="version", version=f"reqtrace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("structure", help="scan a repository into a snapshot file")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    _add_extraction_flags(p)
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("graph", help="build dependency graphs and communities from a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--out", required=True)
    p.add_argument("--dot", default=None, help="also write a Graphviz dot file")
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-community-files", type=int, default=20)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("pipeline", help="run the full requirements pipeline on a repository")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.add_argument("--snapshot-out", default=None)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--usage-out", default=None, help="full usage report incl. wall times")
    _add_extraction_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("refresh", help="re-derive only artifacts invalidated by repository changes")
    p.add_argument("root")
    p.add_argument("--prev", required=True, help="snapshot file of the previous run")
    p.add_argument("--result", required=True, help="result file of the previous run")
    p.add_argument("--trace", required=True, help="trace file of the previous run")
    p.add_argument("--out", required=True)
    p.add_argument("--snapshot-out", default=None)
    p.add_argument("--trace-out", default=None)
    _add_extraction_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_refresh)

    p = sub.add_parser("evaluate", help="score a pipeline result against ground truth")
    p.add_argument("--gen", required=True, help="pipeline result file")
    p.add_argument("--gt-req", required=True)
    p.add_argument("--gt-code", required=True)
    p.add_argument("--gt-links", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--ur-match-threshold", type=float, default=0.5)
    p.add_argument("--matcher", choices=("lexical", "llm_judge"), default="lexical")
    p.add_argument("--sweep-step", type=float, default=0.01)
    p.add_argument("--rank-k", type=int, default=10)
    p.add_argument("--granularity", choices=("file", "component"), default="file")
    p.add_argument("--judge", action="store_true", help="also run document-level judging")
    p.add_argument("--no-figures", action="store_true")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="run a lexical retrieval baseline with cutoff sweep")
    p.add_argument("method", choices=("vsm", "lsi"))
    p.add_argument("--req", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--gt-links", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rank-k", type=int, default=10)
    p.add_argument("--sweep-step", type=float, default=0.01)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="render the use-case document, sidecar, and figures")
    p.add_argument("--result", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("config", help="show configuration")
    p.add_argument("--print-defaults", action="store_true")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReqtraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: malformed input file: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
