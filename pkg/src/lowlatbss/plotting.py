"""Matplotlib rendering of benchmark reports.

Figures are written next to the delimited output files; rendering is
headless (Agg backend) and never required by the processing path.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIG_SIZE = (7.0, 4.2)
DPI = 150


def _style(ax, xlabel, ylabel, title):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)


def plot_convergence(curves: dict, path, ylabel="dSDR [dB]", title="Separation performance vs time"):
    """Line plot of improvement curves; `curves` maps label -> (times, values)."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label, (times, values) in sorted(curves.items()):
        ax.plot(times, values, label=label, linewidth=1.5)
    _style(ax, "time [s]", ylabel, title)
    if curves:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_summary(aggregates: dict, path, title="Performance after convergence"):
    """Grouped bars of mean dSDR/dSIR/dSAR per method.

    `aggregates` maps method label -> dict with keys dsdr, dsir, dsar.
    """
    labels = sorted(aggregates)
    metric_keys = ["dsdr", "dsir", "dsar"]
    metric_names = ["dSDR", "dSIR", "dSAR"]
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    width = 0.25
    for k, (key, name) in enumerate(zip(metric_keys, metric_names)):
        xs = [i + (k - 1) * width for i in range(len(labels))]
        ys = [aggregates[label][key] for label in labels]
        ax.bar(xs, ys, width=width, label=name)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    _style(ax, "", "improvement [dB]", title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
