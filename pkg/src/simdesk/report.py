"""Figure rendering for the report path of headless runs.

Writes PNG files next to the delimited entropy output: the entropy trace
with its analytic endpoints, plus initial/final particle scatters (drawn
through the 3D projection when that unit is present, otherwise as plain
xy projections).
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .kinetics import EntropySample, GasParams


def render_entropy_figure(samples: list[EntropySample], grid_m: int, path: str) -> None:
    ts = [s.t for s in samples]
    ss = [s.s for s in samples]
    s_max = math.log(grid_m ** 3)
    s_min = math.log(grid_m ** 3 / 8.0)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(ts, ss, lw=1.6, color="#1f77b4")
    ax.axhline(s_max, color="#999999", ls="--", lw=1.0)
    ax.axhline(s_min, color="#999999", ls=":", lw=1.0)
    ax.annotate(f"ln m^3 = {s_max:.4f}", (ts[-1] if ts else 1.0, s_max),
                ha="right", va="bottom", fontsize=8, color="#666666")
    ax.annotate(f"ln(m^3/8) = {s_min:.4f}", (ts[-1] if ts else 1.0, s_min),
                ha="right", va="bottom", fontsize=8, color="#666666")
    ax.set_xlabel("t")
    ax.set_ylabel("entropy (k_B = 1)")
    ax.set_title("Free expansion: coarse-grained entropy")
    ax.set_ylim(0.0, s_max + 0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_cloud_figure(positions: np.ndarray, title: str, path: str,
                        max_points: int = 8000) -> None:
    if positions.shape[0] > max_points:
        stride = positions.shape[0] // max_points
        positions = positions[::stride]
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    try:
        from .view3d import Camera, project_cloud

        camera = Camera(eye=(2.4, -1.7, 1.6), look_at=(0.5, 0.5, 0.5),
                        up=(0.0, 0.0, 1.0), fov_y=50.0, near=0.05, far=50.0)
        pts = project_cloud(camera, 1.0, positions)
        order = np.argsort(-pts[:, 2])  # far first, painter's order
        ax.scatter(pts[order, 0], pts[order, 1], s=1.2,
                   c=pts[order, 2], cmap="viridis", linewidths=0)
        ax.set_xlim(-1, 1)
        ax.set_ylim(-1, 1)
        ax.set_xlabel("ndc x")
        ax.set_ylabel("ndc y")
    except ImportError:
        ax.scatter(positions[:, 0], positions[:, 1], s=1.2, linewidths=0)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def write_kinetics_report(out_dir: str, samples: list[EntropySample],
                          params: GasParams, initial_positions, final_positions) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "entropy.png")
    render_entropy_figure(samples, params.entropy_grid_m, path)
    written.append(path)
    if initial_positions is not None:
        path = os.path.join(out_dir, "cloud_initial.png")
        render_cloud_figure(initial_positions, "initial: corner octant", path)
        written.append(path)
    if final_positions is not None:
        path = os.path.join(out_dir, "cloud_final.png")
        render_cloud_figure(final_positions, "final: uniform fill", path)
        written.append(path)
    return written
