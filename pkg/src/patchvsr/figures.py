"""Report figures: every CLI command that writes a JSON report also renders a
matplotlib PNG next to it.  All figures go straight to files (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def save_metric_curve(report: dict, path) -> str:
    """Per-frame metric values with the mean marked."""
    frames = [row["frame"] for row in report["per_frame"]]
    scores = [row["score"] for row in report["per_frame"]]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(frames, scores, marker=".", lw=1)
    ax.axhline(report["mean"], color="tab:red", ls="--", lw=1, label=f"mean {report['mean']:.2f}")
    ax.set_xlabel("frame")
    ax.set_ylabel(report["metric"])
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def save_stationary_map(report: dict, path) -> str:
    """Per-position stationary ratio laid out on the patch grid."""
    rows = report["positions"]
    xs = sorted({row["x"] for row in rows})
    ys = sorted({row["y"] for row in rows})
    grid = np.full((len(ys), len(xs)), np.nan)
    for row in rows:
        ratio = row["stationary"] / row["windows"] if row["windows"] else 0.0
        grid[ys.index(row["y"]), xs.index(row["x"])] = ratio
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(xs)), xs)
    ax.set_yticks(range(len(ys)), ys)
    ax.set_xlabel("patch origin x")
    ax.set_ylabel("patch origin y")
    ax.set_title(f"stationary ratio (window {report['window']}, > {report['threshold']} dB)")
    fig.colorbar(im, ax=ax, label="stationary fraction")
    return _save(fig, path)


def save_cost_timeline(report: dict, path) -> str:
    """Per-frame routing cost ratio with the per-label position counts."""
    rows = report["per_frame"]
    frames = [row["frame"] for row in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    top.plot(frames, [row["cost_ratio"] for row in rows], marker=".", lw=1)
    top.set_ylabel("cost ratio")
    top.set_ylim(0, 1.05)
    top.grid(alpha=0.3)
    counts = {label: [row["labels"][label] for row in rows] for label in ("L1", "L3", "L5")}
    bottom.stackplot(frames, counts["L1"], counts["L3"], counts["L5"], labels=["L1", "L3", "L5"])
    bottom.set_xlabel("frame")
    bottom.set_ylabel("positions")
    bottom.legend(loc="upper right", ncols=3, fontsize=8)
    return _save(fig, path)


def save_injection_ladder(report: dict, path) -> str:
    """Max output drift (and scores, when present) per replication level for
    each compared pipeline."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    for name, run in report["pipelines"].items():
        levels = [row["replication"] for row in run["levels"]]
        diffs = [row["max_abs_diff_dynamic_originals"] for row in run["levels"]]
        axes[0].plot(levels, diffs, marker="o", label=name)
        if run["levels"] and "mean_score_dynamic_originals" in run["levels"][0]:
            scores = [row["mean_score_dynamic_originals"] for row in run["levels"]]
            axes[1].plot(levels, scores, marker="o", label=name)
    axes[0].set_xlabel("copies per anchor")
    axes[0].set_ylabel("max |diff| on dynamic originals")
    axes[0].legend(loc="best", fontsize=8)
    axes[0].grid(alpha=0.3)
    axes[1].set_xlabel("copies per anchor")
    axes[1].set_ylabel("mean score on dynamic originals")
    axes[1].grid(alpha=0.3)
    if axes[1].lines:
        axes[1].legend(loc="best", fontsize=8)
    return _save(fig, path)


def save_replacement_timeline(report: dict, path) -> str:
    """Fraction of pool positions replaced per frame, one line per direction."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for direction, rows in report["replacements"].items():
        ax.plot(
            [row["frame"] for row in rows],
            [row["replaced_fraction"] for row in rows],
            marker=".",
            lw=1,
            label=direction,
        )
    ax.set_xlabel("frame")
    ax.set_ylabel("replaced fraction")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    return _save(fig, path)
