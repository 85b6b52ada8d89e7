"""Figures written next to the CSV output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes stable between runs
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_spectrum(gammas, path, title=""):
    g = np.asarray(gammas)
    fig, ax = plt.subplots(figsize=(5, 5))
    th = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(th), np.sin(th), color="0.7", lw=0.8)
    ax.scatter(g.real, g.imag, s=8, c=np.abs(g), cmap="viridis", vmin=0, vmax=max(1.0, np.abs(g).max()))
    ax.set_aspect("equal")
    ax.set_xlabel(r"Re $\gamma$")
    ax.set_ylabel(r"Im $\gamma$")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_mode(y, mode, path, title="", components=1):
    """Intensity and phase of one eigenmode; coupled doublets get one curve per half."""
    y = np.asarray(y)
    v = np.asarray(mode).reshape(components, -1)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    for c in range(components):
        label = f"v{c + 1}" if components > 1 else None
        ax1.plot(y, np.abs(v[c]) ** 2, lw=1, label=label)
        ax2.plot(y, np.angle(v[c]), lw=0.6)
    for edge in (-1, 1):
        ax1.axvline(edge, color="0.6", ls=":", lw=0.8)
    ax1.set_ylabel(r"$|v|^2$")
    ax2.set_ylabel("phase [rad]")
    ax2.set_xlabel("y / a")
    if components > 1:
        ax1.legend(frameon=False)
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(values, abs_top, path, parameter):
    abs_top = np.asarray(abs_top, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in range(abs_top.shape[1]):
        ax.plot(values, abs_top[:, k], marker="o", ms=3, lw=1, label=f"mode {k}")
    ax.set_xlabel(parameter)
    ax.set_ylabel(r"$|\gamma|$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_asymptotics(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ys = sorted({r.y for r in rows if np.isfinite(r.relative_error)})
    for y in ys:
        pts = sorted((r.t, r.relative_error) for r in rows if r.y == y and np.isfinite(r.relative_error))
        if pts:
            t, e = zip(*pts)
            ax.loglog(t, e, marker="o", ms=3, label=f"y={y:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("relative error of leading term")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
