"""File-target matplotlib rendering for the CLI report paths.

Import is deferred and the Agg backend is forced, so rendering works in
headless runs and the library never requires a display.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "plot_beta",
    "plot_sweep",
    "plot_martingale",
    "plot_resolvent",
    "plot_paths",
]


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def plot_beta(grid, beta: np.ndarray, path: str) -> str:
    """Contract sensitivity components over the quadrature grid."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    values = np.atleast_2d(np.asarray(beta, dtype=float).T)
    for i, comp in enumerate(values):
        ax.plot(grid, comp, label=f"beta[{i}]")
    ax.set_xlabel("t")
    ax.set_ylabel("sensitivity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(rows: list, path: str) -> str:
    """Value of information against T, one curve per parameter pair."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    pairs = sorted({(row["p1"], row["p2"]) for row in rows})
    for p1, p2 in pairs:
        pts = sorted((row["T"], row["voi"]) for row in rows
                     if row["p1"] == p1 and row["p2"] == p2)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker=".", label=f"p1={p1:g}, p2={p2:g}")
    ax.set_xlabel("T")
    ax.set_ylabel("value of information")
    ax.set_ylim(top=1.005)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_martingale(report, path: str) -> str:
    """Checkpoint means with 3-stderr bands against the t=0 level."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.errorbar(report.times, report.means, yerr=3.0 * report.stderrs,
                fmt="o-", capsize=3, label="sample mean")
    ax.axhline(report.initial, color="gray", linestyle="--",
               label="initial value")
    ax.set_xlabel("t")
    ax.set_ylabel("mean of the diagnostic process")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_resolvent(res, path: str, curve=None) -> str:
    """Resolvent entries over the grid, plus the input curve if given."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    d = res.dim
    for i in range(d):
        for j in range(d):
            ax.plot(res.grid, res.values[:, i, j], label=f"R[{i},{j}]")
    if curve is not None:
        g = np.stack([np.atleast_1d(curve(t)) for t in res.grid])
        for i in range(g.shape[1]):
            ax.plot(res.grid, g[:, i], linestyle=":", label=f"g0[{i}]")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_paths(times, paths: np.ndarray, path: str,
               max_paths: int = 50) -> str:
    """A fan of sampled output paths (at most max_paths of them)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    shown = paths[:max_paths]
    for row in shown:
        ax.plot(times, row, linewidth=0.6, alpha=0.5)
    ax.plot(times, paths.mean(axis=0), color="black", linewidth=1.8,
            label=f"mean of {paths.shape[0]} paths")
    ax.set_xlabel("t")
    ax.set_ylabel("output")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
