"""Run artifacts: greppable summaries and matplotlib figures.

Summaries are plain text with stable `key = value` lines. Figures are
rendered headless (Agg) next to the delimited trajectory output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import Trajectory

__all__ = [
    "format_value",
    "write_summary",
    "pairwise_error_curve",
    "render_trajectory_figures",
    "render_certification_figure",
    "render_comparison_figure",
]


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)


def write_summary(path, entries: dict) -> None:
    lines = [f"{key} = {format_value(value)}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def pairwise_error_curve(traj: Trajectory) -> np.ndarray:
    """Max pairwise output distance at every sample."""
    n, p = traj.layout.N, traj.layout.p
    per_agent = traj.outputs.reshape(traj.times.size, n, p)
    worst = np.zeros(traj.times.size)
    for i in range(n):
        for j in range(i + 1, n):
            dist = np.linalg.norm(per_agent[:, i, :] - per_agent[:, j, :], axis=1)
            np.maximum(worst, dist, out=worst)
    return worst


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def render_trajectory_figures(traj: Trajectory, out_dir, prefix: str = "") -> list:
    """outputs / controls / consensus-error figures, returned as paths."""
    out_dir = Path(out_dir)
    layout = traj.layout
    paths = []

    fig, axes = plt.subplots(layout.p, 1, sharex=True, squeeze=False,
                             figsize=(7, 2.6 * layout.p))
    for ch in range(layout.p):
        ax = axes[ch][0]
        for i in range(layout.N):
            ax.plot(traj.times, traj.outputs[:, i * layout.p + ch],
                    label=f"agent {i + 1}")
        ax.set_ylabel(f"output {ch + 1}")
        ax.grid(True, alpha=0.4)
    axes[-1][0].set_xlabel("t")
    axes[0][0].legend(loc="best", fontsize=8)
    axes[0][0].set_title("agent outputs")
    paths.append(_save(fig, out_dir / f"{prefix}outputs.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(layout.N):
        sl = traj.layout.input_slice(i)
        block = traj.controls[:, sl]
        for ch in range(block.shape[1]):
            ax.plot(traj.times, block[:, ch], label=f"u{i + 1},{ch + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("control")
    ax.grid(True, alpha=0.4)
    ax.legend(loc="best", fontsize=8)
    ax.set_title("control signals")
    paths.append(_save(fig, out_dir / f"{prefix}controls.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    curve = pairwise_error_curve(traj)
    positive = np.clip(curve, 1e-18, None)
    ax.semilogy(traj.times, positive)
    ax.set_xlabel("t")
    ax.set_ylabel("max pairwise output error")
    ax.grid(True, which="both", alpha=0.4)
    ax.set_title("consensus error")
    paths.append(_save(fig, out_dir / f"{prefix}consensus_error.png"))
    return paths


def render_certification_figure(report, out_dir) -> Path:
    out_dir = Path(out_dir)
    ks = [row[0] for row in report.rows]
    costs = [row[1] for row in report.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, costs, "o-", label="oracle cost")
    ax.axhline(report.law_cost, color="k", linestyle="--", label="law cost")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("oracle grid cells K")
    ax.set_ylabel("cost")
    ax.grid(True, alpha=0.4)
    ax.legend()
    ax.set_title("optimality certification")
    return _save(fig, out_dir / "certification.png")


def render_comparison_figure(times_opt, errors_opt, times_res, errors_res,
                             out_dir) -> Path:
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(times_opt, np.clip(errors_opt, 1e-18, None),
                label="complete topology (optimal)")
    ax.semilogy(times_res, np.clip(errors_res, 1e-18, None),
                label="restricted topology")
    ax.set_xlabel("t")
    ax.set_ylabel("max pairwise output error")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    ax.set_title("topology comparison")
    return _save(fig, out_dir / "topology_comparison.png")
