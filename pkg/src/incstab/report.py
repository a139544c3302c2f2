"""Result emission: summary JSON and matplotlib figures next to the CSV outputs.

CSV files are the machine contract; the figures are a convenience rendering
of the same data and can be disabled with --no-figures.
"""
from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_summary(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_pair_figure(traj_a, traj_b, controls_a, controls_b, path) -> None:
    """Six panels: coordinates, momenta, and control forces of a coupled pair."""
    n = traj_a.states.shape[1] // 2
    fig, axes = plt.subplots(2 * n + controls_a.shape[1], 1,
                             figsize=(7, 9), sharex=True)
    labels = [f"q{i+1}" for i in range(n)] + [f"p{i+1}" for i in range(n)]
    for i, ax in enumerate(axes[: 2 * n]):
        ax.plot(traj_a.times, traj_a.states[:, i], lw=0.8, label=labels[i])
        ax.plot(traj_b.times, traj_b.states[:, i], lw=0.8, label=labels[i] + "'")
        ax.set_ylabel(labels[i])
        ax.legend(loc="upper right", fontsize=8)
    for j, ax in enumerate(axes[2 * n:]):
        ax.plot(traj_a.times[:-1], controls_a[:, j], lw=0.8, label=f"v{j+1}")
        ax.plot(traj_b.times[:-1], controls_b[:, j], lw=0.8, label=f"v{j+1}'")
        ax.set_ylabel(f"v{j+1}")
        ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("t [s]")
    fig.suptitle("Coupled closed-loop pair (common noise)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_moment_figure(stats, path) -> None:
    """Empirical moment with confidence band against the analytic bound."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(stats.times, stats.mean_dk, lw=1.2, label="empirical moment")
    ax.fill_between(stats.times,
                    np.maximum(stats.mean_dk - stats.ci_halfwidth, 0.0),
                    stats.mean_dk + stats.ci_halfwidth,
                    alpha=0.3, lw=0, label="95% CI")
    ax.plot(stats.times, stats.bound, "k--", lw=1.2, label="analytic bound")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("moment of incremental distance")
    ax.set_yscale("log")
    positive = stats.mean_dk[stats.mean_dk > 0.0]
    if positive.size:
        ax.set_ylim(bottom=max(positive.min() * 0.5, 1e-18))
    ax.legend()
    ax.set_title(f"{stats.realizations} realizations, seed {stats.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_margin_figure(sweep, path) -> None:
    """Dissipation margins of a box sweep against the generator magnitude."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    total = np.abs(sweep.breakdown.total)
    ax.scatter(total, sweep.breakdown.margin, s=4, alpha=0.4)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("|generator value|")
    ax.set_ylabel("dissipation margin")
    ax.set_title(f"min margin {sweep.min_margin:.4g} over {total.size} sampled pairs")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
