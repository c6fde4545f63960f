"""Evaluation artifacts: per-frame and aggregate metrics as JSON, CSV, and a
rendered curve plot."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .synth import ConfusionCounts, metrics

METRIC_KEYS = ("precision", "recall", "fval")


def aggregate_counts(counts: list[ConfusionCounts]) -> ConfusionCounts:
    if not counts:
        raise ValueError("need at least one frame's counts")
    total = counts[0]
    for c in counts[1:]:
        total = total + c
    return total


def _row(frame_id, c: ConfusionCounts) -> dict:
    row = {"frame_id": frame_id, "tp": c.tp, "fp": c.fp, "fn": c.fn,
           "tn": c.tn}
    row.update(metrics(c))
    return row


def write_metrics(out_dir, entries: list[tuple[int, ConfusionCounts]]) -> dict:
    """Write metrics.json, metrics.csv, and metrics.png for the given
    (frame_id, counts) pairs; returns the paths keyed by format.

    Undefined metrics stay null in JSON and empty in CSV; the plot simply
    omits those points.
    """
    if not entries:
        raise ValueError("nothing to report: no frame has ground truth")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [_row(fid, c) for fid, c in entries]
    agg = _row("all", aggregate_counts([c for _, c in entries]))

    json_path = out / "metrics.json"
    json_path.write_text(
        json.dumps({"frames": rows, "aggregate": agg}, indent=2) + "\n",
        encoding="utf-8")

    csv_path = out / "metrics.csv"
    fields = ["frame_id", "tp", "fp", "fn", "tn", *METRIC_KEYS]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows + [agg]:
            writer.writerow({k: ("" if row[k] is None else row[k])
                             for k in fields})

    png_path = out / "metrics.png"
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, marker in zip(METRIC_KEYS, "osd"):
        pts = [(r["frame_id"], r[key]) for r in rows if r[key] is not None]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker=marker, label=key)
    if agg["fval"] is not None:
        ax.axhline(agg["fval"], color="gray", linestyle="--", linewidth=1,
                   label=f"aggregate fval = {agg['fval']:.4f}")
    ax.set_xlabel("frame")
    ax.set_ylabel("score")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return {"json": json_path, "csv": csv_path, "png": png_path}
