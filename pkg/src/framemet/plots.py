"""Report figures, rendered headlessly next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_curves(path, history: list[dict], keys, title: str) -> None:
    """Per-epoch line plot of the requested history keys."""
    epochs = [r["epoch"] for r in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in keys:
        ax.plot(epochs, [r[key] for r in history], marker=".", label=key)
    ax.set_xlabel("epoch")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def save_ablation_bar(path, rows: list[tuple[str, float]]) -> None:
    labels = [mode for mode, _ in rows]
    values = [f1 for _, f1 in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(range(len(rows)), values, color="steelblue")
    ax.bar_label(bars, fmt="%.3f")
    ax.set_xticks(range(len(rows)), labels, rotation=20, ha="right")
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.05)
    ax.set_title("Ablation comparison")
    ax.grid(axis="y", alpha=0.3)
    _save(fig, path)


def save_score_histogram(path, scores, golds) -> None:
    scores = np.asarray(scores)
    golds = np.asarray(golds)
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, 1.0, 21)
    ax.hist(scores[golds == 0], bins=bins, alpha=0.6, label="literal")
    ax.hist(scores[golds == 1], bins=bins, alpha=0.6, label="metaphorical")
    ax.axvline(0.5, color="black", linestyle="--", linewidth=1)
    ax.set_xlabel("predicted score")
    ax.set_ylabel("samples")
    ax.set_title("Score distribution by gold label")
    ax.legend()
    _save(fig, path)


def save_concept_agreement(path, positive_differs: float,
                           negative_identical: float) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    bars = ax.bar(
        [0, 1],
        [positive_differs, negative_identical],
        color=["indianred", "seagreen"],
    )
    ax.bar_label(bars, fmt="%.2f")
    ax.set_xticks(
        [0, 1],
        ["top-1 differs\n(metaphorical)", "top-1 identical\n(literal)"],
    )
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("fraction of samples")
    ax.set_title("Literal vs. contextual frames")
    _save(fig, path)
