"""Deterministic SVG figures for eigenvalue staircases.

Byte-stable output: fixed backend, fixed hash salt for element ids, and no
creation date in the metadata, so re-running a command reproduces the file
exactly.
"""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "quotspec"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def staircase(path, series, title, ylabel="eigenvalue"):
    """Step plot of one or more ascending eigenvalue lists.

    series: iterable of (label, values); values are plotted against their
    index with post-steps, the natural picture for counting functions.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, vals in series:
        vals = list(vals)
        ax.step(range(len(vals)), vals, where="post", label=label, linewidth=1.4)
    ax.set_xlabel("index")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
