"""Static SVG figures (matplotlib, Agg backend)."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

import numpy as np  # noqa: E402

from .csvio import atomic_write_text  # noqa: E402

# fixed salt and no date stamp, so identical data give identical SVG bytes
_RC = {"svg.hashsalt": "mcrnorm", "svg.fonttype": "path"}


def _save(fig: Figure, path) -> Path:
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    return atomic_write_text(path, buf.getvalue())


def line_plot(path, x, Y, labels=None, title: str = "", xlabel: str = "", ylabel: str = "",
              logy: bool = False, markers: bool = False) -> Path:
    """One line per column of ``Y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot()
    style = ".-" if markers else "-"
    for j in range(Y.shape[1]):
        label = labels[j] if labels is not None else None
        ax.plot(x, Y[:, j], style, label=label, lw=1.5)
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if labels is not None:
        ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, path)


def scree_plot(path, s, title: str = "Singular values") -> Path:
    s = np.asarray(s, dtype=float)
    floor = np.finfo(float).tiny
    return line_plot(path, np.arange(1, s.size + 1), np.maximum(s, floor), title=title,
                     xlabel="index", ylabel="singular value", logy=True, markers=True)


def heatmap(path, Z, x, y, title: str = "", xlabel: str = "", ylabel: str = "",
            mark=()) -> Path:
    """``Z[i, j]`` drawn at ``(x[j], y[i])``; ``mark`` holds (x, y, label)
    points to annotate."""
    Z = np.asarray(Z, dtype=float)
    fig = Figure(figsize=(6.0, 4.8))
    ax = fig.add_subplot()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    extent = [x[0], x[-1], y[0], y[-1]]
    im = ax.imshow(Z, origin="lower", aspect="auto", extent=extent, interpolation="nearest")
    fig.colorbar(im, ax=ax)
    for mx, my, label in mark:
        ax.plot([mx], [my], "wo", mec="k")
        ax.annotate(label, (mx, my), textcoords="offset points", xytext=(5, 5), color="w")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _save(fig, path)
