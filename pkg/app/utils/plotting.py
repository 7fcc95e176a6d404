# app/utils/plotting.py
"""Plain SVG figures of stage outputs. Data files stay the primary product."""
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from app.models.statistics import WignerGrid  # noqa: E402

PathLike = Union[str, Path]


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def plot_spectrum(path: PathLike, orders: np.ndarray, spectrum: np.ndarray, cutoff: Optional[int] = None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(orders, np.clip(spectrum, 1e-300, None), lw=0.8)
    if cutoff is not None:
        ax.axvline(cutoff, color="k", ls="--", lw=0.8)
    ax.set_xlabel("harmonic order")
    ax.set_ylabel("emitted energy density [au]")
    return _save(fig, path)


def plot_wigner(path: PathLike, grid: WignerGrid, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    limit = float(np.abs(grid.values).max()) or 1.0
    mesh = ax.pcolormesh(grid.re, grid.im, grid.values, cmap="RdBu_r", vmin=-limit, vmax=limit, shading="auto")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("Re alpha")
    ax.set_ylabel("Im alpha")
    ax.set_title(title)
    return _save(fig, path)


def plot_bloch_wigner(path: PathLike, theta: np.ndarray, phi: np.ndarray, W: np.ndarray, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    limit = float(np.abs(W).max()) or 1.0
    mesh = ax.pcolormesh(phi, theta, W, cmap="RdBu_r", vmin=-limit, vmax=limit, shading="auto")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("phi")
    ax.set_ylabel("theta")
    ax.invert_yaxis()
    ax.set_title(title)
    return _save(fig, path)


def plot_photon_statistics(path: PathLike, p: np.ndarray, reference: Optional[np.ndarray] = None, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    k = np.arange(p.size)
    ax.bar(k, p, width=0.9, color="0.6")
    if reference is not None:
        ax.plot(np.arange(reference.size), reference, "r.-", lw=0.8)
    ax.set_xlabel("photon number")
    ax.set_ylabel("probability")
    ax.set_title(title)
    return _save(fig, path)


def plot_scatter_density(path: PathLike, alpha: np.ndarray, grid: WignerGrid, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.pcolormesh(grid.re, grid.im, grid.values, cmap="viridis", shading="auto")
    ax.plot(alpha.real[:2000], alpha.imag[:2000], ",", color="w", alpha=0.3)
    ax.set_xlabel("Re alpha")
    ax.set_ylabel("Im alpha")
    ax.set_title(title)
    return _save(fig, path)


def plot_curves(path: PathLike, x: np.ndarray, curves: dict, xlabel: str, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, y in curves.items():
        ax.plot(x, y, ".-", label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    ax.set_title(title)
    return _save(fig, path)
