"""Figure rendering for the command-line harness.

Everything draws through the Agg backend straight to files; nothing here
opens a window.  The CSV outputs remain the primary artifacts, these are
the pictures to look at.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import MetricComparison, VectorField, WhiteningReport
from .optimize import DescentTrace


def _quiver(ax, field: VectorField, color):
    ax.quiver(
        field.points[:, 0],
        field.points[:, 1],
        field.directions[:, 0],
        field.directions[:, 1],
        color=color,
        angles="xy",
        width=0.004,
    )


def plot_fig1(
    steepest: DescentTrace,
    natural: DescentTrace,
    raw_field: VectorField,
    whitened_field: VectorField,
    path,
) -> None:
    """Four panels: descent paths, KL curves, raw field, whitened field."""
    fig, axes = plt.subplots(2, 2, figsize=(11, 9))

    ax = axes[0, 0]
    ax.plot(steepest.params[:, 0], steepest.params[:, 1], "r-", lw=1,
            label="steepest")
    ax.plot(natural.params[:, 0], natural.params[:, 1], "b-", lw=1.5,
            label="natural")
    ax.plot([1.0], [-1.0], "ko", ms=5)
    ax.plot([0.0], [0.0], "k*", ms=10)
    ax.set_xlabel(r"$\theta_1$")
    ax.set_ylabel(r"$\theta_2$")
    ax.set_title("descent paths")
    ax.legend()

    ax = axes[0, 1]
    for trace, style, label in [(steepest, "r-", "steepest"),
                                (natural, "b-", "natural")]:
        if trace.kls is not None:
            # log scale cannot show exact zeros
            kl = np.maximum(trace.kls, 1e-300)
            ax.semilogy(np.arange(len(kl)), kl, style, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("KL to true parameters")
    ax.set_title("convergence")
    ax.legend()

    ax = axes[1, 0]
    _quiver(ax, raw_field, "tab:red")
    ax.set_xlabel(r"$\theta_1$")
    ax.set_ylabel(r"$\theta_2$")
    ax.set_title("objective gradient field")

    ax = axes[1, 1]
    _quiver(ax, whitened_field, "tab:blue")
    ax.set_xlabel(r"$\varphi_1$")
    ax.set_ylabel(r"$\varphi_2$")
    ax.set_title("gradient field, whitened coordinates")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fig2(report: WhiteningReport, path) -> None:
    """Raw correlated cloud next to its whitened image, equal aspect."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 5))
    for ax, pts, title in [
        (axes[0], report.raw_samples, "raw samples"),
        (axes[1], report.whitened_samples, "whitened samples"),
    ]:
        ax.scatter(pts[:, 0], pts[:, 1], s=4, alpha=0.4)
        ax.set_aspect("equal")
        ax.set_title(title)
        ax.set_xlabel("$x_1$")
        ax.set_ylabel("$x_2$")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metrics(report: MetricComparison, path) -> None:
    """Grouped bars of the four matrix entries per estimator."""
    names = list(report.rows)
    entries = np.array(
        [report.rows[n].as_dense_matrix().mat.ravel() for n in names]
    )
    labels = ["$G_{11}$", "$G_{12}$", "$G_{21}$", "$G_{22}$"]
    x = np.arange(len(labels))
    width = 0.8 / len(names)

    fig, ax = plt.subplots(figsize=(8, 5))
    for i, name in enumerate(names):
        ax.bar(x + (i - (len(names) - 1) / 2) * width, entries[i], width,
               label=name)
    ax.set_xticks(x, labels)
    ax.set_ylabel("entry value")
    ax.set_title(f"metric estimates at {np.round(report.at_params, 3).tolist()}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fit(trace: DescentTrace, path) -> None:
    """Objective value along the fit, log scale when it stays positive."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    steps = np.arange(len(trace.objectives))
    values = trace.objectives
    floor = values.min()
    if floor > 0:
        ax.semilogy(steps, values, "b-")
    else:
        ax.plot(steps, values, "b-")
    ax.set_xlabel("step")
    ax.set_ylabel("objective")
    suffix = " (diverged)" if trace.diverged else ""
    ax.set_title(
        f"fit: {len(values) - 1} steps, stopped by {trace.terminated_by}{suffix}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
