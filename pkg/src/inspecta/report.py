"""Report figures rendered alongside the delimited outputs.

All figures go to files through the Agg backend; nothing here opens a
window. Layout follows the source experiments: per-axis estimate tracks
against ground truth, a top-down voxel map with trajectories, and the
planner comparison table as bars.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def estimation_figure(truth_trace, vo_estimates, fused_estimates, path):
    """Four panels (x, y, z, yaw over time): truth vs VO vs fused."""
    truth = np.asarray(truth_trace)
    fig, axes = plt.subplots(2, 2, figsize=(11, 7), sharex=True)
    labels = ["x [m]", "y [m]", "z [m]", "yaw [rad]"]
    for k, ax in enumerate(axes.ravel()):
        ax.plot(truth[:, 0], truth[:, k + 1], "k-", lw=1.2, label="ground truth")
        for ests, color, name in ((vo_estimates, "tab:orange", "VO"),
                                  (fused_estimates, "tab:blue", "fused")):
            if ests:
                ts = [e.timestamp for e in ests]
                vals = [e.yaw if k == 3 else e.position[k] for e in ests]
                ax.plot(ts, vals, color=color, lw=0.9, alpha=0.85, label=name)
        ax.set_ylabel(labels[k])
        ax.grid(alpha=0.3)
    axes[1, 0].set_xlabel("t [s]")
    axes[1, 1].set_xlabel("t [s]")
    axes[0, 0].legend(loc="best", fontsize=8)
    fig.suptitle("State estimation vs ground truth")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def map_figure(grid, path, truth_grid=None, trajectory=None, planned_path=None):
    """Top-down z-max occupancy slice with optional trajectory overlays."""
    fig, ax = plt.subplots(figsize=(8, 6))
    if truth_grid is not None and truth_grid.occupied:
        pts = np.array(sorted(truth_grid.occupied))
        centers = truth_grid.origin[None, :2] + (pts[:, :2] + 0.5) * truth_grid.voxel_size
        ax.scatter(centers[:, 0], centers[:, 1], s=4, c="0.85", marker="s",
                   label="truth")
    occ = [k for k, lo in grid.log_odds.items()
           if 1.0 / (1.0 + np.exp(-lo)) > grid.occupancy_threshold]
    if occ:
        pts = np.array(sorted(occ))
        centers = grid.origin[None, :2] + (pts[:, :2] + 0.5) * grid.voxel_size
        ax.scatter(centers[:, 0], centers[:, 1], s=4, c="tab:red", marker="s",
                   label="mapped")
    if trajectory is not None:
        traj = np.asarray(trajectory)
        ax.plot(traj[:, 1], traj[:, 2], "b-", lw=1.0, label="flight")
    if planned_path is not None:
        way = np.array([[p.position[0], p.position[1]] for p in planned_path.waypoints])
        ax.plot(way[:, 0], way[:, 1], "g.-", lw=1.2, ms=5, label="plan")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("Occupancy map (top-down)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def planner_figure(rows, path):
    """Success rate and mean length per algorithm."""
    algs = [r["algorithm"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.bar(algs, [r["success_rate"] for r in rows], color="tab:blue")
    ax1.set_ylim(0, 1.05)
    ax1.set_ylabel("success rate")
    lengths = [0.0 if np.isnan(r["mean_length"]) else r["mean_length"] for r in rows]
    ax2.bar(algs, lengths, color="tab:green")
    ax2.set_ylabel("mean path length [m]")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3, axis="y")
    fig.suptitle("Planner comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
