"""Matplotlib figure output: rollout frames, loss curves, score charts.

Every figure is written as SVG with a fixed hash salt and no date
metadata, so rerunning a command reproduces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "softmod"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .mesher import RobotMesh  # noqa: E402

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}

PASSIVE_COLOR = "0.65"
ACTUATOR_CMAP = "viridis"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def _terrain_line(ax, terrain, x_lo: float, x_hi: float) -> None:
    xs = np.linspace(x_lo, x_hi, 512)
    ax.plot(xs, terrain.height(xs), color="black", linewidth=1.2)


def render_frame(mesh: RobotMesh, positions: np.ndarray, u_row: np.ndarray,
                 terrain, path, xlim, ylim) -> Path:
    """One simulation frame: springs colored by actuation, terrain below."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    segs = np.stack([positions[mesh.spring_i], positions[mesh.spring_j]],
                    axis=1)
    passive = mesh.actuator < 0
    if passive.any():
        ax.add_collection(LineCollection(segs[passive], colors=PASSIVE_COLOR,
                                         linewidths=1.0, zorder=2))
    active = ~passive
    if active.any():
        cmap = plt.get_cmap(ACTUATOR_CMAP)
        colors = cmap(u_row[mesh.actuator[active]])
        ax.add_collection(LineCollection(segs[active], colors=colors,
                                         linewidths=1.6, zorder=3))
    ax.scatter(positions[:, 0], positions[:, 1], s=8, color="black",
               zorder=4)
    _terrain_line(ax, terrain, xlim[0], xlim[1])
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.set_aspect("equal")
    ax.set_xlabel("x (block lengths)")
    ax.set_ylabel("y")
    return _save(fig, path)


def render_frames(mesh: RobotMesh, trajectory, terrain, signals: np.ndarray,
                  out_dir, stride: int) -> list[Path]:
    """Frames at every `stride` states plus the final one.

    The trajectory must have been recorded with positions.
    """
    if trajectory.positions is None:
        raise ValueError("trajectory has no recorded positions")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    positions = trajectory.positions
    last = positions.shape[0] - 1
    steps = list(range(0, last + 1, stride))
    if steps[-1] != last:
        steps.append(last)

    pad = 0.5
    x_lo = float(positions[..., 0].min()) - pad
    x_hi = float(positions[..., 0].max()) + pad
    ys = np.concatenate([positions[..., 1].ravel(),
                         np.asarray(terrain.height(
                             np.linspace(x_lo, x_hi, 64))).ravel()])
    ylim = (float(ys.min()) - pad, float(ys.max()) + pad)

    out_dir = Path(out_dir)
    paths = []
    for t in steps:
        u_row = signals[min(t, signals.shape[0] - 1)]
        paths.append(render_frame(
            mesh, positions[t], u_row, terrain,
            out_dir / f"frame_{t:06d}.svg", (x_lo, x_hi), ylim))
    return paths


def render_loss_curve(history: list[float], path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(range(len(history)), history, marker=".", linewidth=1.0)
    best = int(np.argmin(history))
    ax.scatter([best], [history[best]], color="crimson", zorder=3,
               label=f"best @ {best}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, path)


def _block_bars(ax, blocks: dict, field: str, title: str) -> None:
    names = list(blocks)
    values = [getattr(blocks[n], field) for n in names]
    xs = np.arange(len(names))
    shown = [0.0 if v is None else v for v in values]
    ax.bar(xs, shown, color="#4878a8")
    for x, v in zip(xs, values):
        label = "n/a" if v is None else f"{v:.2f}"
        ax.text(x, 0.0 if v is None else v, label, ha="center",
                va="bottom", fontsize=7)
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=20, fontsize=7)
    ax.set_title(title, fontsize=9)


def render_metrics_report(report, path) -> Path:
    """Six small panels: one per score, bars per task group + overall."""
    blocks = {"overall": report.overall, **report.per_task}
    panels = [
        ("syntax_rate", "syntax rate"),
        ("instruction_following", "instruction following"),
        ("progress", "progress (blocks)"),
        ("opt_mean_time", "mean completion time (s)"),
        ("opt_completion_rate", "completion rate"),
        ("novelty", "novelty"),
    ]
    fig, axes = plt.subplots(2, 3, figsize=(10.0, 5.6))
    for ax, (field, title) in zip(axes.ravel(), panels):
        _block_bars(ax, blocks, field, title)
    fig.tight_layout()
    return _save(fig, path)


def render_dataset_summary(records, path) -> Path:
    """Corpus at a glance: completion times, sizes, progress by task."""
    times = [r.time_cost for r in records if r.time_cost is not None]
    blocks = [r.blocks for r in records]
    fig, axes = plt.subplots(1, 3, figsize=(10.0, 3.2))
    if times:
        axes[0].hist(times, bins=20, color="#4878a8")
    axes[0].set_title(f"completion times ({len(times)}/{len(records)})",
                      fontsize=9)
    axes[0].set_xlabel("seconds")
    lo, hi = min(blocks), max(blocks)
    axes[1].hist(blocks, bins=np.arange(lo - 0.5, hi + 1.5), color="#4878a8")
    axes[1].set_title("design size", fontsize=9)
    axes[1].set_xlabel("blocks")
    by_task: dict[str, list[float]] = {}
    for r in records:
        by_task.setdefault(r.task.objective, []).append(r.progress)
    names = list(by_task)
    axes[2].boxplot([by_task[n] for n in names], tick_labels=names)
    axes[2].set_title("progress by task", fontsize=9)
    axes[2].set_ylabel("blocks")
    fig.tight_layout()
    return _save(fig, path)
