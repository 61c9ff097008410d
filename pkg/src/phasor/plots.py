"""Figure rendering for the CLI report paths.

Every function writes a file and returns its path; the delimited outputs
stay the canonical interface, figures are a convenience on top.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_LABEL_STYLE = {
    0: dict(c="0.65", s=4, label="normal"),
    1: dict(c="tab:blue", s=18, label="spatial outlier"),
    2: dict(c="tab:red", s=18, label="contextual outlier"),
}


def save_stream_scatter(points, path):
    """Scatter of the first two feature dimensions, colored by label."""
    t = np.array([p.t for p in points])
    v = np.array([p.v[:2] for p in points])
    lab = np.array([p.label for p in points])
    fig, ax = plt.subplots(figsize=(6, 5))
    for value, style in _LABEL_STYLE.items():
        m = lab == value
        if m.any():
            ax.scatter(v[m, 0], v[m, 1], **style)
    ax.set_xlabel("f0")
    ax.set_ylabel("f1")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"{len(t)} points over {t[-1] - t[0]:.0f} s")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_spectrum(magnitudes, t0, path, labels=None):
    """Stem-style magnitude spectra, one panel per observer row."""
    magnitudes = np.atleast_2d(magnitudes)
    n_obs, n_bins = magnitudes.shape
    fig, axes = plt.subplots(
        n_obs, 1, figsize=(6, 1.8 * n_obs), sharex=True, squeeze=False
    )
    bins = np.arange(n_bins)
    for i in range(n_obs):
        ax = axes[i, 0]
        ax.vlines(bins, 0.0, magnitudes[i], lw=1.5)
        ax.set_ylabel(labels[i] if labels else f"obs {i}", fontsize=8)
    axes[-1, 0].set_xlabel(f"frequency bin (bin n has period T0/n, T0 = {t0:g} s)")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_shapes(offsets, shapes, path, labels=None):
    """Reconstructed temporal shapes over a horizon of offsets."""
    shapes = np.atleast_2d(shapes)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, row in enumerate(shapes):
        ax.plot(offsets, row, lw=1.0, label=labels[i] if labels else f"obs {i}")
    ax.set_xlabel("time offset (s)")
    ax.set_ylabel("reconstructed intensity")
    if shapes.shape[0] <= 12:
        ax.legend(fontsize=7, ncol=2)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_sampling(interval_starts, counts, interval, path):
    """Bar chart of model-sampling events per time interval."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(interval_starts, counts, width=0.9 * interval, align="edge")
    ax.set_xlabel("stream time (s)")
    ax.set_ylabel(f"points sampled per {interval:g} s")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def save_roc(scores, labels01, path):
    """Empirical ROC curve of binary labels vs scores."""
    scores = np.asarray(scores, dtype=float)
    labels01 = np.asarray(labels01, dtype=int)
    order = np.argsort(-scores, kind="stable")
    lab = labels01[order]
    tpr = np.r_[0.0, np.cumsum(lab)] / max(lab.sum(), 1)
    fpr = np.r_[0.0, np.cumsum(1 - lab)] / max((1 - lab).sum(), 1)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(fpr, tpr, lw=1.5)
    ax.plot([0, 1], [0, 1], ls="--", c="0.6", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
