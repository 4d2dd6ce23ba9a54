"""The three figure styles: coverage curves, goal metrics, visitation heatmap."""

from __future__ import annotations

import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .series import SchemaError

DPI = 120


class BoundsError(ValueError):
    """A visitation dump entry lies outside the layout grid."""


def _curve_axes(ax, series_list, column):
    for series in series_list:
        x = series.mean("env_steps")
        ax.plot(x, series.mean(column), label=series.label)
        lo, hi = series.band(column)
        ax.fill_between(x, lo, hi, alpha=0.25)
    ax.set_xlabel("environment steps")
    ax.legend()


def plot_coverage(series_list, out_path: str):
    """State-coverage curves: per-series seed mean with a min-max band."""
    fig, ax = plt.subplots(figsize=(6, 4))
    _curve_axes(ax, series_list, "coverage_cells")
    ax.set_ylabel("cells visited")
    ax.set_title("state coverage")
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    return fig


def plot_goal_metrics(series_list, out_path: str):
    """Goals-reached and mean-remaining-distance curves, side by side."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    _curve_axes(ax1, series_list, "goals_reached")
    ax1.set_ylabel("goals reached")
    _curve_axes(ax2, series_list, "mean_goal_distance")
    ax2.set_ylabel("mean distance to goal")
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    return fig


def parse_layout_grid(text: str) -> np.ndarray:
    """Wall mask from the maze text format (`#` wall; top row first)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty layout")
    return np.array([[ch == "#" for ch in line] for line in lines])


def read_visits(path: str):
    """(x, y, count) triples from a visitation dump CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for name in ("x", "y", "count"):
        if rows and name not in rows[0]:
            raise SchemaError(f"{path}: missing column {name!r}")
    return [(int(r["x"]), int(r["y"]), int(r["count"])) for r in rows]


def plot_heatmap(layout_text: str, visits, out_path: str):
    """Visit-count heatmap over the maze: walls dark, counts color-mapped."""
    walls = parse_layout_grid(layout_text)
    height, width = walls.shape
    counts = np.zeros((height, width))
    for x, y, c in visits:
        if not (0 <= x < width and 0 <= y < height):
            raise BoundsError(f"cell ({x}, {y}) outside {width}x{height} grid")
        counts[height - 1 - y, x] = c  # dump rows are bottom-origin
    img = np.ma.masked_where(walls, counts)
    fig, ax = plt.subplots(figsize=(5, 5))
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("#202020")
    im = ax.imshow(img, cmap=cmap, interpolation="nearest")
    fig.colorbar(im, ax=ax, label="visits")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI)
    return fig
