"""Static figure rendering for run reports.

Figures are written as PNG files next to the delimited output; nothing is
shown interactively.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_configuration(t: np.ndarray, phi: np.ndarray, s: np.ndarray,
                       out_dir: Path, stem: str = "trajectory") -> Path:
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    axes[0].plot(t, phi, lw=0.9)
    axes[0].set_ylabel("phi [rad]")
    axes[1].plot(t, s, lw=0.9, color="tab:orange")
    axes[1].set_ylabel("s [m]")
    axes[1].set_xlabel("t [s]")
    axes[0].set_title("configuration")
    return _save(fig, out_dir / f"{stem}_config.png")


def plot_force(t_edges: np.ndarray, u: np.ndarray, out_dir: Path,
               stem: str = "trajectory") -> Path:
    fig, ax = plt.subplots(figsize=(7, 3))
    if u.size:
        ax.step(t_edges[: u.size], u, where="post", lw=0.9)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("u [N]")
    ax.set_title("control force")
    return _save(fig, out_dir / f"{stem}_force.png")


def plot_pair_invariants(t: np.ndarray, p: np.ndarray, e: np.ndarray,
                         out_dir: Path, stem: str = "trajectory") -> Path:
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    axes[0].plot(t[: p.size], p, lw=0.9)
    axes[0].set_ylabel("momentum")
    axes[1].plot(t[: e.size], e, lw=0.9, color="tab:green")
    axes[1].set_ylabel("energy")
    axes[1].set_xlabel("t [s]")
    axes[0].set_title("pair invariants")
    return _save(fig, out_dir / f"{stem}_invariants.png")


def render_run_figures(out_dir: Path, t: np.ndarray, phi: np.ndarray,
                       s: np.ndarray, u: np.ndarray,
                       p: np.ndarray | None = None,
                       e: np.ndarray | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [plot_configuration(t, phi, s, out_dir)]
    paths.append(plot_force(t, np.asarray(u, float), out_dir))
    if p is not None and e is not None and np.asarray(p).size:
        paths.append(plot_pair_invariants(t, np.asarray(p, float),
                                          np.asarray(e, float), out_dir))
    return paths
