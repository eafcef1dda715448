"""Figure rendering for the CLI report paths.  Everything draws to a file
through the Agg backend; no interactive windows.
"""
from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 130


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_trajectory(traj, path, max_channels: int = 4) -> None:
    """Observation channels over time (first few components)."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    t = np.arange(traj.horizon + 1)
    for i in range(min(traj.m, max_channels)):
        ax.plot(t, traj.observations[:, i], lw=0.7, label=f"y_{i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("observation")
    ax.legend(loc="upper left", fontsize=8)
    _finish(fig, path)


def plot_block_errors(
    block_errors: Sequence[float],
    path,
    naive_errors: Optional[Sequence[float]] = None,
) -> None:
    """Per-lag impulse-response error of the estimator(s)."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    j = np.arange(len(block_errors))
    ax.semilogy(j, block_errors, "o-", label="stabilized")
    if naive_errors is not None:
        ax.semilogy(np.arange(len(naive_errors)), naive_errors, "s--",
                    label="naive")
    ax.set_xlabel("lag j")
    ax.set_ylabel("block error (Frobenius)")
    ax.legend()
    _finish(fig, path)


def plot_singular_values(singular_values: Sequence[float], order: int, path) -> None:
    """Spectrum of the minus Hankel with the chosen rank marked."""
    sv = np.asarray(singular_values, float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(np.arange(1, sv.size + 1), np.maximum(sv, 1e-18), "o")
    ax.axvline(order + 0.5, color="tab:red", lw=0.8, ls="--",
               label=f"rank {order}")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.legend()
    _finish(fig, path)


def plot_variance(reports, path) -> None:
    """Second moment of the scalar demo error vs horizon, per estimator."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for kind, style in (("naive", "o-"), ("stabilized", "s--")):
        rows = sorted(
            (r for r in reports if r.kind == kind), key=lambda r: r.T
        )
        if rows:
            ax.loglog([r.T for r in rows], [r.second_moment for r in rows],
                      style, label=kind)
    ax.axhline(20.0, color="gray", lw=0.8, ls=":", label="divergence floor")
    ax.set_xlabel("T")
    ax.set_ylabel("E[error^2]")
    ax.legend()
    _finish(fig, path)


def plot_lowerbound(rows, path) -> None:
    """Indistinguishability factor vs its ceiling across the delta grid."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    horizons = sorted({r.T for r in rows})
    for T in horizons:
        sub = sorted((r for r in rows if r.T == T and r.delta > 0),
                     key=lambda r: r.delta)
        if not sub:
            continue
        deltas = [r.delta for r in sub]
        ax.loglog(deltas, [max(r.mult_factor, 1e-18) for r in sub], "o-",
                  label=f"measured, T={T}")
        ax.loglog(deltas, [r.predicted_bound for r in sub], "--",
                  label=f"ceiling, T={T}")
    ax.set_xlabel("delta")
    ax.set_ylabel("multiplicative factor")
    ax.legend(fontsize=8)
    _finish(fig, path)


def plot_probe(hyper, anti, path) -> None:
    """Fourth-moment ratios vs declared K and anti-concentration headroom."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.5))
    kinds = [row["kind"] for row in hyper]
    x = np.arange(len(kinds))
    ax1.bar(x - 0.2, [row["K_hat"] for row in hyper], width=0.4,
            label="measured")
    ax1.bar(x + 0.2, [row["K"] for row in hyper], width=0.4, label="declared")
    ax1.set_xticks(x, kinds, rotation=30, ha="right", fontsize=8)
    ax1.set_ylabel("fourth-moment ratio")
    ax1.legend(fontsize=8)
    kinds2 = [row["kind"] for row in anti]
    x2 = np.arange(len(kinds2))
    ax2.bar(x2 - 0.2, [row["max_probability"] for row in anti], width=0.4,
            label="measured")
    ax2.bar(x2 + 0.2, [row["bound"] for row in anti], width=0.4,
            label="ceiling")
    ax2.set_xticks(x2, kinds2, rotation=30, ha="right", fontsize=8)
    ax2.set_ylabel("max Pr[|z-b|<=0.1]")
    ax2.legend(fontsize=8)
    _finish(fig, path)
