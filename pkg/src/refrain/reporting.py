"""Run reports, per-query diagnostics, and comparison rendering.

Run reports are line-delimited JSON: one ``{"qid", "truth", "ranked"}``
record per query (sorted by query id) followed by a single summary line
with the recall table.  Two runs that rank identically serialize to
byte-identical files, which the gating invariants rely on.

The ``report`` command path renders matplotlib figures next to the
delimited comparison table.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ValidationError
from .repetition import QueryDiagnostic
from .retrieval import RetrievalRun


def write_run_report(run: RetrievalRun, path) -> None:
    lines = []
    order = sorted(range(len(run.query_ids)), key=lambda i: run.query_ids[i])
    for i in order:
        lines.append(json.dumps({
            "qid": run.query_ids[i],
            "truth": run.truths[i],
            "ranked": list(run.ranked[i]),
        }))
    lines.append(json.dumps({
        "direction": run.direction,
        "queries": len(run.query_ids),
        "recall": {str(n): run.recall[n] for n in sorted(run.recall)},
    }))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_run_report(path) -> dict:
    """Return the summary line plus per-query records of a run report."""
    queries = []
    summary = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        obj = json.loads(raw)
        if "recall" in obj:
            summary = obj
        elif "qid" in obj:
            queries.append(obj)
        else:
            raise ValidationError("unrecognized run record", line=lineno)
    if summary is None:
        raise ValidationError(f"{path}: no summary line found")
    summary["per_query"] = queries
    return summary


def write_diagnostics(diagnostics: list[QueryDiagnostic], path) -> None:
    lines = []
    for diag in sorted(diagnostics, key=lambda d: d.qid):
        lines.append(json.dumps({
            "qid": diag.qid,
            "candidates": list(diag.candidate_ids),
            "votes": list(diag.report.votes),
            "histogram": {str(k): v for k, v in diag.report.histogram.items()},
            "me": diag.report.me_value,
            "triggered": diag.report.triggered,
            "pre_rank": diag.pre_rank,
            "post_rank": diag.post_rank,
        }))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_diagnostics(path) -> list[dict]:
    records = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.strip():
            records.append(json.loads(raw))
    return records


def format_recall_table(entries: list[tuple[str, dict]]) -> str:
    """Fixed-width text table of recall values per labeled run."""
    ranks = sorted({int(n) for _, recall in entries for n in recall})
    header = ["metric"] + [label for label, _ in entries]
    rows = [header]
    for n in ranks:
        row = [f"R@{n}"]
        for _, recall in entries:
            value = recall.get(n, recall.get(str(n)))
            row.append("-" if value is None else f"{value:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    out = []
    for row in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(out)


def write_comparison_csv(entries: list[tuple[str, dict]], path) -> None:
    ranks = sorted({int(n) for _, recall in entries for n in recall})
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + [label for label, _ in entries])
        for n in ranks:
            row = [f"R@{n}"]
            for _, recall in entries:
                value = recall.get(n, recall.get(str(n)))
                row.append("" if value is None else f"{value:.6f}")
            writer.writerow(row)


def render_recall_figure(entries: list[tuple[str, dict]], path) -> None:
    """Grouped bar chart of R@N per run."""
    ranks = sorted({int(n) for _, recall in entries for n in recall})
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(1, len(entries))
    for offset, (label, recall) in enumerate(entries):
        values = [recall.get(n, recall.get(str(n), 0.0)) for n in ranks]
        positions = [i + offset * width for i in range(len(ranks))]
        ax.bar(positions, values, width=width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(ranks))])
    ax.set_xticklabels([f"R@{n}" for n in ranks])
    ax.set_ylabel("recall")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_me_histogram(records: list[dict], path, bins: int = 20) -> None:
    """Histogram of per-query matching-entropy values."""
    values = [r["me"] for r in records]
    triggered = sum(1 for r in records if r.get("triggered"))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=bins, color="tab:blue", edgecolor="black")
    ax.set_xlabel("matching entropy (nats)")
    ax.set_ylabel("queries")
    ax.set_title(f"{triggered}/{len(records)} queries triggered")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
