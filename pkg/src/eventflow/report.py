"""Matplotlib figures written alongside the CSV outputs.

Figures use the Agg backend and strip the software tag from PNG metadata, so
identical inputs render to identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}

INSIDE_COLOR = "#c0392b"
OUTSIDE_COLOR = "#2e6da4"


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_temporal(hist, path):
    """Hourly counts inside and outside the corridor, one x tick per day."""
    inside = hist.inside.ravel()
    outside = hist.outside.ravel()
    hours = np.arange(len(inside))
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(hours, inside, color=INSIDE_COLOR, label="inside corridor")
    ax.plot(hours, outside, color=OUTSIDE_COLOR, label="outside corridor")
    ax.set_xticks(np.arange(len(hist.days)) * 24)
    ax.set_xticklabels([d.isoformat() for d in hist.days])
    for k in range(1, len(hist.days)):
        ax.axvline(24 * k, color="0.8", lw=0.8)
    ax.set_xlim(0, max(len(inside) - 1, 1))
    ax.set_xlabel("local time")
    ax.set_ylabel("records per hour")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_flow_shares(tables, path, top_k=10):
    tables = list(tables)
    if not tables:
        return
    n = len(tables)
    ncols = min(n, 4)
    nrows = int(np.ceil(n / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.8 * nrows), squeeze=False)
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    for ax, table in zip(axes.ravel(), tables):
        ranks = table.ranks()
        origins = sorted(table.rows, key=lambda o: (ranks[o], o))[:top_k]
        shares = [100.0 * table.rows[o].share for o in origins]
        colors = ["0.25" if o == table.destination_region_id else "0.65" for o in origins]
        ax.barh(np.arange(len(origins)), shares, color=colors)
        ax.set_yticks(np.arange(len(origins)))
        ax.set_yticklabels(origins, fontsize=8)
        ax.invert_yaxis()
        ax.set_title(table.destination_region_id, fontsize=10)
        ax.set_xlabel("% of visitors", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_comparison(rows, destination, path):
    rows = list(rows)
    if not rows:
        return
    y = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(rows) + 1.2))
    ax.barh(y - 0.2, [100 * r.share_baseline for r in rows], height=0.4, color="0.6", label="baseline")
    ax.barh(y + 0.2, [100 * r.share_event for r in rows], height=0.4, color=INSIDE_COLOR, label="event")
    ax.set_yticks(y)
    ax.set_yticklabels([r.origin for r in rows])
    ax.invert_yaxis()
    ax.set_xlabel("% of visitors")
    ax.set_title(f"origins of visitors to {destination}")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_hotspots(raw_rows, rate_rows, path):
    """Gi* z-scores from raw counts and from population rates, zone by zone."""
    raw = {r.region_id: r.gi_star_z for r in raw_rows}
    rate = {r.region_id: r.gi_star_z for r in rate_rows}
    ids = sorted(set(raw) | set(rate), key=lambda k: (-rate.get(k, -np.inf), k))
    x = np.arange(len(ids))
    fig, ax = plt.subplots(figsize=(max(6, 0.3 * len(ids)), 3.5))
    ax.bar(x - 0.2, [raw.get(k, np.nan) for k in ids], width=0.4, color="0.6", label="raw count")
    ax.bar(x + 0.2, [rate.get(k, np.nan) for k in ids], width=0.4, color=INSIDE_COLOR, label="per capita")
    for thr in (1.645, 1.96, 2.58):
        ax.axhline(thr, color="0.7", lw=0.6, ls="--")
    ax.set_xticks(x)
    ax.set_xticklabels(ids, rotation=90, fontsize=7)
    ax.set_ylabel("Gi* z")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_surfaces(fixed, variable, path, title=""):
    """Fixed- and variable-bandwidth surfaces side by side, each on its own extent."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    for ax, surf, label in ((axes[0], fixed, "fixed bandwidth"), (axes[1], variable, "variable bandwidth")):
        g = surf.grid
        extent = [g.origin.x / 1e3, (g.origin.x + g.n_cols * g.cell_size) / 1e3,
                  g.origin.y / 1e3, (g.origin.y + g.n_rows * g.cell_size) / 1e3]
        im = ax.imshow(surf.values, origin="lower", extent=extent, vmin=0, cmap="magma")
        ax.set_title(label)
        ax.set_xlabel("x (km)")
        fig.colorbar(im, ax=ax, shrink=0.8, label="density (1/m²)")
    axes[0].set_ylabel("y (km)")
    if title:
        fig.suptitle(title)
    _save(fig, path)
