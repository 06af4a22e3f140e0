"""Figure rendering for experiment reports.

Uses the Agg backend so figures render headlessly to files next to the CSV
output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ExperimentSummary


def render_regret_curves(summary: ExperimentSummary, path: str | Path, title: str | None = None):
    """Mean cumulative regret per algorithm with shaded 95% bands."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for row in summary.rows:
        line, = ax.plot(row.curve_t, row.curve_mean, label=row.label, linewidth=1.4)
        ax.fill_between(
            row.curve_t,
            row.curve_mean - row.curve_ci95,
            row.curve_mean + row.curve_ci95,
            color=line.get_color(),
            alpha=0.2,
            linewidth=0,
        )
    ax.set_xlabel("t")
    ax.set_ylabel("mean cumulative regret")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_final_regret(summary: ExperimentSummary, path: str | Path, title: str | None = None):
    """Final mean regret per algorithm as a bar chart with 95% error bars."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    labels = [row.label for row in summary.rows]
    means = [row.mean_final_regret for row in summary.rows]
    errs = [row.ci95 for row in summary.rows]
    ax.bar(range(len(labels)), means, yerr=errs, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean final regret")
    if title:
        ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
