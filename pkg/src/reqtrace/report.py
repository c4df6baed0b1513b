"""Rendering: use-case documents, machine-readable sidecars, and figures.

The report path writes a human-readable document, a JSON sidecar, and
matplotlib figures rendered to files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

from .agents import PipelineResult
from .trace import TraceSet


def render_report_markdown(result: PipelineResult, trace: TraceSet | None = None) -> str:
    lines = ["# User-level requirements", ""]
    lines.append(f"Revision: {result.revision_label}")
    lines.append(f"Communities: {len(result.communities)}  Requirements: {len(result.urs)}")
    lines.append("")
    for ur in sorted(result.urs, key=lambda u: u.ur_id):
        lines.append(f"## {ur.ur_id}: {ur.name}")
        lines.append("")
        lines.append("**Actors**")
        lines += [f"- {a}" for a in ur.actors]
        lines.append("")
        lines.append("**Description**")
        lines.append(ur.description)
        lines.append("")
        lines.append("**Preconditions**")
        lines += [f"- {p}" for p in ur.preconditions]
        lines.append("")
        lines.append("**Event flow**")
        lines += [f"{i}. {s}" for i, s in enumerate(ur.event_flow, start=1)]
        lines.append("")
        lines.append("**Exit conditions**")
        lines += [f"- {c}" for c in ur.exit_conditions]
        lines.append("")
        if ur.business_rules:
            lines.append("**Business rules**")
            lines += [f"- {b}" for b in ur.business_rules]
            lines.append("")
    lines.append("## Trace appendix")
    lines.append("")
    records = trace.records if trace is not None else ()
    if not records:
        lines.append("(no trace records)")
    for record in records:
        lines.append(f"### {record.ur_id} (revision {record.revision_label})")
        lines.append("Files:")
        lines += [f"- {p}" for p in record.file_paths]
        lines.append("Components:")
        lines += [f"- {c}" for c in record.component_ids]
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def report_sidecar(result: PipelineResult, trace: TraceSet | None = None) -> dict:
    from .agents import result_to_dict
    from .trace import trace_to_dict

    doc = {"result": result_to_dict(result)}
    if trace is not None:
        doc["trace"] = trace_to_dict(trace)
    return doc


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_community_sizes_figure(result: PipelineResult, path: str | Path) -> None:
    plt = _pyplot()
    sizes = {cid: len(files) for cid, files in sorted(result.communities.items())}
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([str(c) for c in sizes], list(sizes.values()), color="#4878a8")
    ax.set_xlabel("community")
    ax.set_ylabel("files")
    ax.set_title("Community sizes")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_trace_matrix_figure(result: PipelineResult, trace: TraceSet, path: str | Path) -> None:
    plt = _pyplot()
    files = sorted({p for record in trace.records for p in record.file_paths})
    ur_ids = [record.ur_id for record in trace.records]
    grid = [[1 if f in record.file_paths else 0 for f in files] for record in trace.records]
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(files) + 2), max(3, 0.4 * len(ur_ids) + 1.5)))
    if grid:
        ax.imshow(grid, cmap="Blues", aspect="auto", vmin=0, vmax=1)
    ax.set_xticks(range(len(files)), files, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(ur_ids)), ur_ids, fontsize=7)
    ax.set_title("Requirement-to-file trace links")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_sweep_curve_figure(curve, best_cutoff: float, path: str | Path) -> None:
    plt = _pyplot()
    cutoffs = [point[0] for point in curve]
    f1s = [point[3] for point in curve]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(cutoffs, f1s, color="#4878a8")
    ax.axvline(best_cutoff, color="#a84848", linestyle="--", linewidth=1)
    ax.set_xlabel("similarity cutoff")
    ax.set_ylabel("F1")
    ax.set_title("Cutoff sweep")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def write_sweep_curve_tsv(curve, path: str | Path) -> None:
    lines = ["cutoff\tprecision\trecall\tf1"]
    for cutoff, precision, recall, f1 in curve:
        lines.append(f"{cutoff:.4f}\t{precision:.6f}\t{recall:.6f}\t{f1:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
