"""Figure rendering for CLI report paths.

Every plot lands next to its CSV twin; the core harness stays free of
matplotlib so library users only pay for plotting when they ask for it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import AttackReport, ScsrResult


def plot_report(report: AttackReport, member_probs: np.ndarray, truth: list[str], path: str | Path) -> None:
    """Histogram of predicted member probability, split by ground truth."""
    probs = np.asarray(member_probs)
    is_member = np.array([t == "member" for t in truth])
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0.0, 1.0, 31)
    ax.hist(probs[is_member], bins=bins, alpha=0.6, label="members", color="#c23b22")
    ax.hist(probs[~is_member], bins=bins, alpha=0.6, label="non-members", color="#3b6fc2")
    ax.axvline(0.5, color="gray", linestyle=":")
    ax.set_xlabel("predicted member probability")
    ax.set_ylabel("images")
    ax.set_title(f"attack accuracy {report.accuracy:.3f}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(fractions: list[float], reports: list[AttackReport], path: str | Path) -> None:
    """Attack metrics versus the adversary's knowledge fraction."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric in ("accuracy", "f1"):
        ax.plot(fractions, [getattr(r, metric) for r in reports], marker="o", label=metric)
    ax.axhline(0.5, color="gray", linestyle=":", label="chance")
    ax.set_xlabel("known fraction")
    ax.set_ylabel("metric")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_curve(similarities: np.ndarray, path: str | Path, label: str = "part response") -> None:
    """Ranked similarity curve for one part query."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(similarities)), similarities, marker=".", label=label)
    ax.set_xlabel("rank")
    ax.set_ylabel("cosine similarity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scsr(result: ScsrResult, path: str | Path) -> None:
    """Defense search trace: attack accuracy per evaluated lower bound."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for stage, marker, color in ((1, "o", "#3b6fc2"), (2, "x", "#c23b22")):
        pts = [p for p in result.trace if p.stage == stage]
        if pts:
            ax.scatter(
                [p.bound for p in pts],
                [p.accuracy for p in pts],
                marker=marker,
                color=color,
                label=f"stage {stage}",
            )
    ax.axvline(result.chosen_bound, color="green", linestyle="--", label="chosen bound")
    ax.set_xlabel("crop-scale lower bound")
    ax.set_ylabel("attack accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
