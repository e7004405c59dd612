"""Figures written next to the delimited report files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or version strings, so identical results give identical files
_PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_cluster_means(means, path, titles=None):
    """Side-by-side heatmaps with contours, one per cluster mean."""
    means = np.asarray(means)
    K = means.shape[0]
    vmin, vmax = means.min(), means.max()
    fig, axes = plt.subplots(1, K, figsize=(3.2 * K, 3.6), squeeze=False)
    for k, ax in enumerate(axes[0]):
        im = ax.imshow(means[k], cmap="viridis", vmin=vmin, vmax=vmax, origin="lower", aspect="auto")
        if np.ptp(means[k]) > 0:
            ax.contour(means[k], levels=6, colors="white", linewidths=0.6)
        ax.set_title(titles[k] if titles else f"cluster {k}")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.8)
    return _save(fig, path)


def plot_k_posterior(k_post: dict, path):
    ks = sorted(k_post)
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.bar([str(k) for k in ks], [k_post[k] for k in ks], color="0.3")
    ax.set_xlabel("number of clusters")
    ax.set_ylabel("posterior frequency")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    return _save(fig, path)


def plot_log_joint(traces, path, burnin=None):
    fig, ax = plt.subplots(figsize=(6, 3))
    for c, tr in enumerate(traces):
        ax.plot(np.arange(1, tr.log_joint.size + 1), tr.log_joint, lw=0.7, label=f"chain {c}")
    if burnin:
        ax.axvline(burnin, color="k", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("log joint density")
    if len(traces) <= 8:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def render_report(result, output_dir) -> list:
    out = Path(output_dir)
    files = [
        plot_cluster_means(result.means, out / "cluster_means.png"),
        plot_k_posterior(result.k_posterior, out / "k_posterior.png"),
    ]
    if result.traces:
        files.append(plot_log_joint(result.traces, out / "log_joint.png", result.config.get("burnin")))
    return files
