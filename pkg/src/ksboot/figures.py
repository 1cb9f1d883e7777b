"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import math

import numpy as np
from matplotlib.figure import Figure

__all__ = ["qq_grid", "power_curves", "table2_figure"]

_DPI = 150


def qq_grid(cell_summaries, path, title=None):
    """Panel of p-value Q-Q plots, rows by n, columns by tau."""
    ns = sorted({s.n for s in cell_summaries})
    taus = sorted({s.tau for s in cell_summaries})
    by_key = {(s.n, s.tau): s for s in cell_summaries}
    fig = Figure(figsize=(2.1 * max(len(taus), 1) + 0.8, 2.1 * max(len(ns), 1) + 0.8))
    axes = fig.subplots(len(ns), len(taus), squeeze=False, sharex=True, sharey=True)
    for i, n in enumerate(ns):
        for j, tau in enumerate(taus):
            ax = axes[i][j]
            ax.plot([0, 1], [0, 1], color="0.6", lw=0.8)
            s = by_key.get((n, tau))
            if s is not None and s.qq_points.size:
                ax.plot(s.qq_points[:, 0], s.qq_points[:, 1], ".", ms=1.5, color="C0")
            if i == 0:
                ax.set_title(f"tau={tau:g}", fontsize=9)
            if j == 0:
                ax.set_ylabel(f"n={n}", fontsize=9)
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1)
            ax.tick_params(labelsize=7)
    if title:
        fig.suptitle(title, fontsize=11)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")


def power_curves(cell_summaries, path, alpha=0.05):
    """Rejection rate against tau, one line per n, one panel per case."""
    cases = []
    for s in cell_summaries:
        key = (s.margin, s.hypothesis)
        if key not in cases:
            cases.append(key)
    ncol = min(2, len(cases))
    nrow = math.ceil(len(cases) / ncol)
    fig = Figure(figsize=(4.2 * ncol, 3.2 * nrow))
    axes = np.asarray(fig.subplots(nrow, ncol, squeeze=False)).ravel()
    for ax, key in zip(axes, cases):
        cells = [s for s in cell_summaries if (s.margin, s.hypothesis) == key]
        for n in sorted({s.n for s in cells}):
            pts = sorted((s.tau, s.sizes[alpha]) for s in cells if s.n == n)
            ax.plot([t for t, _ in pts], [r for _, r in pts], "o-", ms=3, label=f"n={n}")
        ax.axhline(alpha, color="0.6", lw=0.8, ls="--")
        ax.set_xlabel("Kendall's tau")
        ax.set_ylabel(f"rejection rate (alpha={alpha:g})")
        ax.set_title(f"{key[0]} tested as {key[1]}", fontsize=10)
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=8)
    for ax in axes[len(cases):]:
        ax.set_visible(False)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")


def table2_figure(rows, path, alpha=0.05):
    """P-values per method across degrees of freedom (log scale)."""
    labels = ["inf" if math.isinf(r["nu"]) else f"{r['nu']:g}" for r in rows]
    methods = [k for k in ("npbb", "spb", "npb", "pb") if any(k in r for r in rows)]
    fig = Figure(figsize=(5.6, 3.6))
    ax = fig.subplots()
    x = np.arange(len(rows))
    floor = 1e-4
    for m in methods:
        y = [max(r.get(m) if r.get(m) is not None else np.nan, floor) for r in rows]
        ax.plot(x, y, "o-", ms=4, label=m.upper())
    ax.axhline(alpha, color="0.5", lw=0.8, ls="--", label=f"alpha={alpha:g}")
    ax.set_yscale("log")
    ax.set_xticks(x, labels)
    ax.set_xlabel("degrees of freedom")
    ax.set_ylabel("bootstrap p-value")
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
