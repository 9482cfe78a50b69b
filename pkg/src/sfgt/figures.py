"""Matplotlib renderers for the CLI report path.

Each function writes one PNG next to the delimited export it illustrates:
mask heatmaps, the eigenvalue ladder, band-energy kernel densities, and
the training loss curve. The core library never imports this module;
figure output is a CLI concern.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# drop the Software tag so rerenders are byte-identical
_SAVEFIG_KWARGS = {"dpi": 150, "metadata": {"Software": None}}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVEFIG_KWARGS)
    plt.close(fig)
    return path


def mask_heatmaps(s: np.ndarray, f: np.ndarray, m: np.ndarray, path: str | Path) -> Path:
    """Side-by-side heatmaps of the structure, filter, and refined mask."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2), constrained_layout=True)
    for ax, matrix, title in zip(axes, (s, f, m), ("structure S", "filter F", "mask M")):
        im = ax.imshow(matrix, cmap="viridis", interpolation="nearest")
        ax.set_title(title)
        ax.set_xlabel("node j")
        ax.set_ylabel("node i")
        fig.colorbar(im, ax=ax, shrink=0.85)
    return _save(fig, path)


def spectrum_figure(eigenvalues: np.ndarray, path: str | Path) -> Path:
    """Eigenvalue ladder with the low/high band threshold at 1."""
    lam = np.asarray(eigenvalues, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot(np.arange(lam.size), lam, "o-", ms=4)
    ax.axhline(1.0, color="tab:red", lw=1, ls="--", label="band threshold")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_ylim(-0.05, 2.05)
    ax.legend(loc="upper left")
    return _save(fig, path)


def _gaussian_kde(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Scott's-rule Gaussian kernel density with a bandwidth floor."""
    spread = float(values.std())
    span = float(values.max() - values.min())
    bandwidth = max(spread * values.size ** (-0.2), 1e-3 * max(span, 1.0))
    z = (grid[:, None] - values[None, :]) / bandwidth
    return np.exp(-0.5 * z * z).sum(axis=1) / (values.size * bandwidth * np.sqrt(2 * np.pi))


def energy_density_figure(e_low: np.ndarray, e_high: np.ndarray, path: str | Path) -> Path:
    """Kernel densities of per-node low- and high-frequency energies."""
    e_low = np.asarray(e_low, dtype=float).ravel()
    e_high = np.asarray(e_high, dtype=float).ravel()
    top = max(float(e_low.max(initial=0.0)), float(e_high.max(initial=0.0)), 1e-6)
    grid = np.linspace(0.0, 1.1 * top, 256)
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot(grid, _gaussian_kde(e_low, grid), label="low-frequency energy")
    ax.plot(grid, _gaussian_kde(e_high, grid), label="high-frequency energy")
    ax.set_xlabel("per-node energy")
    ax.set_ylabel("density")
    ax.legend()
    return _save(fig, path)


def loss_curve_figure(losses, path: str | Path) -> Path:
    """Training loss per epoch."""
    losses = np.asarray(list(losses), dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot(np.arange(1, losses.size + 1), losses)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    return _save(fig, path)
