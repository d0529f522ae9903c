"""Figure rendering for the report path.

One grouped bar chart per stage, metrics by algorithm, written as PNG next
to the delimited reports. Rows are the same records emit_comparison
produces: algorithm, stage, and the four metrics as percentages.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METRIC_BARS = ("accuracy", "f1", "precision", "recall")
PNG_METADATA = {"Software": "dtc"}  # keep bytes stable across runs


def save_stage_comparison(rows: list[dict], out_path: str, stage: str) -> str:
    """Grouped bars of the four headline metrics for every algorithm run at
    one stage, mirroring the stage-wise comparison tables."""
    stage_rows = sorted(
        (r for r in rows if r["stage"] == stage),
        key=lambda r: -float(r["accuracy"]),
    )
    algorithms = [r["algorithm"] for r in stage_rows]
    values = np.array(
        [[float(r[m]) for m in METRIC_BARS] for r in stage_rows]
    )

    fig, ax = plt.subplots(figsize=(2.0 + 1.6 * max(1, len(algorithms)), 4.2))
    x = np.arange(len(algorithms))
    width = 0.2
    for i, metric in enumerate(METRIC_BARS):
        ax.bar(x + (i - 1.5) * width, values[:, i], width, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(algorithms, rotation=20, ha="right")
    ax.set_ylabel("percent")
    ax.set_ylim(0, 105)
    ax.set_title(f"Stage-wise metrics, {stage}")
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120, metadata=PNG_METADATA)
    plt.close(fig)
    return out_path


def save_comparison_figures(
    rows: list[dict], out_dir: str, stem: str = "comparison"
) -> list[str]:
    """One figure per stage present in the rows."""
    paths = []
    for stage in sorted({r["stage"] for r in rows}):
        path = os.path.join(out_dir, f"{stem}_{stage.lower()}.png")
        paths.append(save_stage_comparison(rows, path, stage))
    return paths
