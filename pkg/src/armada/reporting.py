"""Summaries and figures over candidate manifests.

Reads the JSON-lines candidate manifest the pipeline writes, aggregates
per-strategy counts, acceptance rate, and the distance histogram, and
renders the figures next to the delimited output so a run's quality can be
eyeballed without loading anything into a notebook.
"""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import ManifestError
from .selection import HISTOGRAM_BINS
from .substitution import Strategy

logger = logging.getLogger(__name__)

_ROW_KEYS = {
    "id",
    "source_id",
    "image_path",
    "text",
    "strategy",
    "attribute",
    "old_value",
    "new_value",
    "edit_instruction",
    "distance",
    "accepted",
}


def read_candidates(path: Path | str) -> list[dict]:
    """Parse a candidate manifest, validating row shape per line."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(0, f"cannot read candidates {path}: {exc}") from exc
    rows = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or set(obj) != _ROW_KEYS:
            raise ManifestError(line_no, "row does not match the candidate manifest schema")
        if not isinstance(obj["distance"], (int, float)) or isinstance(obj["distance"], bool):
            raise ManifestError(line_no, "distance must be a number")
        if not isinstance(obj["accepted"], bool):
            raise ManifestError(line_no, "accepted must be a boolean")
        if obj["strategy"] not in {s.value for s in Strategy}:
            raise ManifestError(line_no, f"unknown strategy {obj['strategy']!r}")
        rows.append(obj)
    return rows


def summarize_candidates(rows: list[dict]) -> dict:
    """Aggregate counts, acceptance rate, and a distance histogram."""
    distances = [float(r["distance"]) for r in rows]
    accepted = sum(1 for r in rows if r["accepted"])
    strategy_counts = {s.value: 0 for s in Strategy}
    accepted_by_strategy = {s.value: 0 for s in Strategy}
    for row in rows:
        strategy_counts[row["strategy"]] += 1
        if row["accepted"]:
            accepted_by_strategy[row["strategy"]] += 1
    if distances:
        counts, edges = np.histogram(distances, bins=HISTOGRAM_BINS)
        histogram = {"counts": [int(c) for c in counts], "edges": [float(e) for e in edges]}
    else:
        histogram = {"counts": [0] * HISTOGRAM_BINS, "edges": []}
    return {
        "total": len(rows),
        "accepted": accepted,
        "rejected": len(rows) - accepted,
        "acceptance_rate": (accepted / len(rows)) if rows else 0.0,
        "strategy_counts": strategy_counts,
        "accepted_by_strategy": accepted_by_strategy,
        "distance_histogram": histogram,
    }


def render_figures(rows: list[dict], fig_dir: Path | str, stem: str = "report") -> list[Path]:
    """Write the distance histogram and per-strategy bar chart as PNG files.

    Returns the written paths; an empty manifest renders nothing.
    """
    if not rows:
        return []
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []

    accepted_d = [float(r["distance"]) for r in rows if r["accepted"]]
    rejected_d = [float(r["distance"]) for r in rows if not r["accepted"]]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.hist(
        [accepted_d, rejected_d],
        bins=HISTOGRAM_BINS,
        stacked=True,
        label=["accepted", "rejected"],
        color=["#2a9d8f", "#e76f51"],
    )
    ax.set_xlabel("Fréchet distance")
    ax.set_ylabel("candidates")
    ax.set_title("Distance distribution of augmentation candidates")
    ax.legend()
    fig.tight_layout()
    distances_path = fig_dir / f"{stem}_distances.png"
    fig.savefig(distances_path, dpi=120)
    plt.close(fig)
    written.append(distances_path)

    strategies = [s.value for s in Strategy]
    accepted_counts = [
        sum(1 for r in rows if r["strategy"] == s and r["accepted"]) for s in strategies
    ]
    rejected_counts = [
        sum(1 for r in rows if r["strategy"] == s and not r["accepted"]) for s in strategies
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    positions = np.arange(len(strategies))
    ax.bar(positions, accepted_counts, label="accepted", color="#2a9d8f")
    ax.bar(
        positions, rejected_counts, bottom=accepted_counts, label="rejected", color="#e76f51"
    )
    ax.set_xticks(positions)
    ax.set_xticklabels(strategies, rotation=15)
    ax.set_ylabel("candidates")
    ax.set_title("Candidates per substitution strategy")
    ax.legend()
    fig.tight_layout()
    strategies_path = fig_dir / f"{stem}_strategies.png"
    fig.savefig(strategies_path, dpi=120)
    plt.close(fig)
    written.append(strategies_path)
    return written


def run_report(
    candidates_path: Path | str,
    fig_dir: Path | str | None = None,
    figures: bool = True,
) -> tuple[dict, list[Path]]:
    """Summarize a candidate manifest and render its figures.

    Figures default to the manifest's own directory so they land alongside
    the delimited output.
    """
    candidates_path = Path(candidates_path)
    rows = read_candidates(candidates_path)
    summary = summarize_candidates(rows)
    paths: list[Path] = []
    if figures:
        target = Path(fig_dir) if fig_dir is not None else candidates_path.parent
        paths = render_figures(rows, target, stem=candidates_path.stem)
    return summary, paths
