"""Matplotlib figures for evaluation reports and the standalone scatter plot."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .net import atomic_write  # noqa: E402

CANVAS_PX = 640
MARGIN = 0.05

plt.rcParams["svg.hashsalt"] = "bdbm"
plt.rcParams["svg.fonttype"] = "none"


def scatter_svg(points) -> str:
    """640x640 scatter plot as SVG text; one ``<use>`` element per point, axes at data bounds +5%.

    The points sit in the group ``<g id="points">``.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("scatter plot needs 2-column data")
    if len(pts) == 0:
        raise ValueError("scatter plot needs at least one point")
    # 72 user units per inch, so the canvas is 640 units square
    fig = plt.figure(figsize=(CANVAS_PX / 72, CANVAS_PX / 72), dpi=72)
    ax = fig.add_axes([0.1, 0.1, 0.85, 0.85])
    ax.plot(pts[:, 0], pts[:, 1], linestyle="none", marker="o", markersize=3, color="tab:blue", gid="points")
    # tick marks are drawn as <use> elements too; labels alone keep the count exact
    ax.tick_params(length=0)
    ax.set_xlim(*_padded(pts[:, 0]))
    ax.set_ylim(*_padded(pts[:, 1]))
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def _padded(v):
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo if hi > lo else max(abs(lo), 1.0)
    return lo - MARGIN * span, hi + MARGIN * span


def write_scatter_svg(points, path):
    atomic_write(path, scatter_svg(points))


def translation_figure(direction: str, source, generated, reference, path):
    """Side-by-side source / generated / reference panels for one sampling direction."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharex=True, sharey=True)
    panels = (("source", source, "tab:gray"), ("generated", generated, "tab:blue"),
              ("reference", reference, "tab:orange"))
    for ax, (title, pts, color) in zip(axes, panels):
        pts = np.asarray(pts)
        ax.scatter(pts[:, 0], pts[:, 1], s=4, color=color, alpha=0.6, linewidths=0)
        ax.set_title(f"{direction}: {title}")
        ax.set_aspect("equal", adjustable="box")
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata={"Software": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def loss_figure(losses, path, window: int = 100):
    losses = np.asarray(losses, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(losses) + 1), losses, lw=0.5, color="tab:gray", label="loss")
    if len(losses) >= window:
        smooth = np.convolve(losses, np.ones(window) / window, mode="valid")
        ax.plot(np.arange(window, len(losses) + 1), smooth, color="tab:blue", label=f"mean of {window}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata={"Software": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())
