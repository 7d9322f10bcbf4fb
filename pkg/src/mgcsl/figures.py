"""Rendering of benchmark summaries into figure files.

Uses the non-interactive backend so rendering works headless; every function
writes PNG files and returns the paths, nothing is shown on screen.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _cell_labels(rows):
    return [f"{r['graph']}-d{r['d']}\n{r['constraint']}" for r in rows]


def _grouped_bars(ax, rows, fields, colors):
    labels = _cell_labels(rows)
    x = np.arange(len(rows))
    width = 0.8 / max(len(fields), 1)
    for k, field in enumerate(fields):
        means = [r.get(f"{field}_mean", np.nan) for r in rows]
        stds = [r.get(f"{field}_std", 0.0) or 0.0 for r in rows]
        ax.bar(x + (k - (len(fields) - 1) / 2) * width, means, width,
               yerr=stds, capsize=3, label=field, color=colors[k % len(colors)])
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)


def render_bench_figures(summary_rows, out_dir):
    """Bar charts (accuracy, SHD, runtime) for a list of per-cell summary rows.

    Rows need graph/d/constraint keys plus <metric>_mean/_std fields; an empty
    row list renders nothing.  Returns the written file paths.
    """
    out_dir = Path(out_dir)
    if not summary_rows:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(max(4, 1.4 * len(summary_rows)), 3.6))
    _grouped_bars(ax, summary_rows, ("precision", "recall", "f1"),
                  ("#4878cf", "#6acc65", "#d65f5f"))
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("edge accuracy per cell")
    fig.tight_layout()
    p = out_dir / "accuracy.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(summary_rows)), 3.6))
    _grouped_bars(ax, summary_rows, ("shd",), ("#956cb4",))
    ax.set_ylabel("structural hamming distance")
    ax.set_title("SHD per cell")
    fig.tight_layout()
    p = out_dir / "shd.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(summary_rows)), 3.6))
    _grouped_bars(ax, summary_rows, ("runtime_seconds",), ("#d5a05a",))
    ax.set_ylabel("seconds")
    ax.set_title("wall-clock runtime per cell")
    fig.tight_layout()
    p = out_dir / "runtime.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written
