"""PNG figures for CLI tables, written next to the CSV."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def figure_path(out):
    return Path(out).with_suffix(".png")


def plot_table(out, header, rows, x, ys, group=None, logy=False, title=""):
    """Line plot of columns ``ys`` against ``x``; one line per value of ``group``.

    Returns the PNG path.
    """
    col = {name: i for i, name in enumerate(header)}
    rows = list(rows)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    positive = False
    keys = sorted({r[col[group]] for r in rows}) if group else [None]
    for key in keys:
        sub = [r for r in rows if group is None or r[col[group]] == key]
        xv = np.array([float(r[col[x]]) for r in sub])
        for y in ys:
            yv = np.array([float(r[col[y]]) for r in sub])
            positive = positive or bool(np.any(yv > 0))
            label = y if key is None else f"{y} {group}={key}"
            ax.plot(xv, yv, marker="." if len(sub) < 50 else None, label=label)
    if logy and positive:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_title(title)
    if len(keys) * len(ys) <= 12:
        ax.legend(fontsize="small")
    fig.tight_layout()
    path = figure_path(out)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
