"""Figure rendering for sweep tables and score files.

Figures are written as PNG next to the delimited outputs; rendering is
optional and never touches the data files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import LabeledScores, SweepResult

__all__ = ["plot_sweep", "plot_scores", "roc_points"]


def plot_sweep(rows: list[SweepResult], out_dir: str) -> list[str]:
    """AUC and query-time curves vs m, one line per c, exact as reference."""
    os.makedirs(out_dir, exist_ok=True)
    cells = [r for r in rows if not r.is_exact and r.error is None]
    exact = next((r for r in rows if r.is_exact), None)
    c_values = sorted({r.c for r in cells})
    written = []

    for metric, label, fname in (
        ("auc", "AUC-ROC", "sweep_auc.png"),
        ("query_seconds", "query time [s]", "sweep_time.png"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for c in c_values:
            pts = sorted((r.m, getattr(r, metric)) for r in cells if r.c == c)
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", markersize=3, label=f"c={c}")
        if exact is not None and getattr(exact, metric) is not None:
            ax.axhline(getattr(exact, metric), color="k", linestyle="--",
                       linewidth=1, label="exact")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("m (partitions)")
        ax.set_ylabel(label)
        ax.legend(fontsize=8, ncol=2)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, fname)
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def roc_points(ls: LabeledScores) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) curve points, thresholds descending."""
    order = np.argsort(-ls.scores, kind="stable")
    y = ls.labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # collapse threshold ties to their last point
    s = ls.scores[order]
    last = np.r_[s[1:] != s[:-1], True]
    tpr = np.r_[0.0, tp[last] / max(tp[-1], 1)]
    fpr = np.r_[0.0, fp[last] / max(fp[-1], 1)]
    return fpr, tpr


def plot_scores(ls: LabeledScores, out_dir: str) -> list[str]:
    """ROC curve plus score histograms split by label."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fpr, tpr = roc_points(ls)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(fpr, tpr)
    ax.plot([0, 1], [0, 1], color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "roc.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    normal = ls.scores[ls.labels == 0]
    anom = ls.scores[ls.labels == 1]
    bins = np.histogram_bin_edges(ls.scores, bins=50)
    ax.hist(normal, bins=bins, alpha=0.6, label="normal")
    ax.hist(anom, bins=bins, alpha=0.6, label="anomalous")
    ax.set_xlabel("anomaly score")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "score_hist.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
