"""Figure rendering for the command-line report paths.

Every command writes its delimited data first and then drops a PNG next to
it.  Figures carry no timestamps or metadata so identical runs produce
identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def _new_axes(xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def render_trajectory(times, columns, labels, path, title="evolution"):
    fig, ax = _new_axes("time", "probability", title)
    for lab in labels:
        if lab == "norm":
            continue
        ax.plot(times, columns[lab], label=lab, lw=1.2)
    ax.legend(loc="best", fontsize=8)
    ax2 = ax.twinx()
    drift = np.abs(columns["norm"] - columns["norm"][0])
    ax2.semilogy(times, np.maximum(drift, 1e-18), color="0.6", lw=0.8,
                 label="|norm drift|")
    ax2.set_ylabel("|norm drift|", color="0.4")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_spectrum(eigenvalues, path, title="spectrum"):
    fig, ax = _new_axes("eigenindex", "eigenvalue", title)
    idx = np.arange(len(eigenvalues))
    ax.plot(idx, eigenvalues, "o-", ms=4)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_convergence(n_nodes, values, path, title="grid refinement"):
    fig, ax = _new_axes("n_nodes", "|value - finest|", title)
    ref = values[-1]
    errs = np.abs(np.asarray(values[:-1]) - ref)
    ax.loglog(n_nodes[:-1], np.maximum(errs, 1e-18), "o-")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_verification(rows, path, title="identity residuals"):
    fig, ax = _new_axes("report row", "error vs tolerance", title)
    errs = [max(r.rel_err if r.mode == "rel" else r.abs_err, 1e-18)
            for r in rows]
    tols = [r.tolerance for r in rows]
    colors = ["tab:blue" if r.passed else "tab:red" for r in rows]
    x = np.arange(len(rows))
    ax.bar(x, errs, color=colors)
    ax.plot(x, tols, "k--", lw=1.0, label="tolerance")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
