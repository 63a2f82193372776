"""Figures written next to the tabular reports.

Only file output is supported; the Agg backend is forced so this works on
headless machines.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _grid_array(grid):
    return np.array([[np.nan if t is None else t for t in row] for row in grid], dtype=float)


def plot_ignition_map(grid, path, title: str = "Ignition time (min)"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        arr = np.ma.masked_invalid(_grid_array(grid))
        cmap = plt.get_cmap("inferno_r").copy()
        cmap.set_bad("0.85")
        im = ax.imshow(arr, cmap=cmap, origin="upper", interpolation="nearest",
                       extent=(0.5, arr.shape[1] + 0.5, arr.shape[0] + 0.5, 0.5))
        ax.set_xlabel("column")
        ax.set_ylabel("row")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, label="minutes")
        fig.savefig(path)
        plt.close(fig)


def plot_aggregate(report, path):
    """Clipped consequents and their aggregate, with the centroid marked."""
    inf = report.inference
    lo, hi = report.universe
    u = np.linspace(lo, hi, 501)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.fill_between(u, inf.aggregate.sample(u), color="C0", alpha=0.3, label="aggregate")
        for (name, alpha, consequent) in report.rows:
            if alpha > 0:
                ax.plot(u, [min(alpha, _mf(report, consequent)(x)) for x in u],
                        lw=1, label=f"{name} -> {consequent} ({alpha:.3g})")
        ax.axvline(report.crisp, color="k", ls="--", lw=1, label=f"centroid {report.crisp:.4f}")
        ax.set_xlim(lo, hi)
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("lifetime (min)")
        ax.set_ylabel("membership")
        ax.legend(loc="upper right", frameon=False)
        fig.savefig(path)
        plt.close(fig)


def _mf(report, term):
    return report.output_var.term(term)


def plot_comparison(comparison, path):
    conv = comparison.conventional.ignition_grid
    fuzz = comparison.fuzzy.ignition_grid
    vmax = np.nanmax(np.concatenate([_grid_array(conv).ravel(), _grid_array(fuzz).ravel()]))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.6), sharey=True)
        for ax, grid, label in zip(axes, (conv, fuzz), ("conventional", "fuzzy")):
            arr = np.ma.masked_invalid(_grid_array(grid))
            im = ax.imshow(arr, cmap="inferno_r", vmin=0, vmax=vmax, interpolation="nearest")
            ax.set_title(label)
            ax.set_xlabel("column")
        axes[0].set_ylabel("row")
        fig.colorbar(im, ax=axes, label="ignition time (min)")
        fig.savefig(path)
        plt.close(fig)
