"""Report figures for CLI runs.

Rendered with the Agg backend straight to files; the core numerics never
import this module.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_field_figure",
    "save_sinogram_figure",
    "save_rays_figure",
    "save_profile_figure",
    "save_residual_figure",
    "save_scatter_loglog_figure",
]


def _finish(fig, path):
    path = Path(path)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def save_field_figure(field, path, title="field"):
    fig, ax = plt.subplots(figsize=(5, 4.2))
    dom = field.domain
    im = ax.imshow(
        np.real(field.values),
        origin="lower",
        extent=(dom.xmin, dom.xmax, dom.ymin, dom.ymax),
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return _finish(fig, path)


def save_sinogram_figure(sino, path, title="sinogram"):
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    g = sino.geometry
    im = ax.imshow(
        np.real(sino.values),
        origin="lower",
        aspect="auto",
        extent=(0.0, 360.0, -g.p_max, g.p_max),
        cmap="magma",
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title)
    ax.set_xlabel("direction angle [deg]")
    ax.set_ylabel("p")
    return _finish(fig, path)


def save_rays_figure(traces, path, mask=None, title="rays"):
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    if mask is not None:
        dom = mask.domain
        ax.imshow(
            mask.mask,
            origin="lower",
            extent=(dom.xmin, dom.xmax, dom.ymin, dom.ymax),
            cmap="Greys",
            alpha=0.35,
        )
    for tr in traces:
        ax.plot(tr.xs[:, 0], tr.xs[:, 1], lw=1.0)
        ax.plot(tr.xs[0, 0], tr.xs[0, 1], "k.", ms=3)
    ax.set_aspect("equal")
    ax.set_title(title)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return _finish(fig, path)


def save_profile_figure(curves, path, title="radial profiles", xlabel="r"):
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    for label, x, y in curves:
        ax.plot(x, y, lw=1.2, label=label)
    ax.legend(fontsize=8)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_residual_figure(residuals, path, title="residual history"):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.semilogy(residuals, lw=1.2)
    ax.set_title(title)
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual")
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def save_scatter_loglog_figure(xs, ys, path, fit=None, title="stability probe",
                               xlabel="data distance", ylabel="pair distance"):
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(xs, ys, "o", ms=4)
    if fit is not None:
        mu, intercept = fit
        xs = np.asarray(xs, dtype=float)
        xx = np.linspace(xs.min(), xs.max(), 50)
        ax.loglog(xx, np.exp(intercept) * xx**mu, "-", lw=1.0,
                  label=f"slope {mu:.3f}")
        ax.legend(fontsize=8)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3, which="both")
    return _finish(fig, path)
