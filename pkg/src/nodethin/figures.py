"""Matplotlib figure rendering for the CLI report paths. Figures are written
next to the delimited output files; everything uses the Agg backend so runs
stay headless."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_nodes_figure(nodes, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 6))
    interior = ~nodes.boundary
    ax.scatter(nodes.coords[interior, 0], nodes.coords[interior, 1], s=1.5, c="k")
    if np.any(nodes.boundary):
        ax.scatter(
            nodes.coords[nodes.boundary, 0],
            nodes.coords[nodes.boundary, 1],
            s=4.0,
            c="tab:red",
        )
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_clr_figure(records, path):
    """records: list of dicts with keys k, clr_avg, clr_sd."""
    ks = [r["k"] for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, [r["clr_avg"] for r in records], "o-", label="CLR (average)")
    ax.plot(ks, [r["clr_sd"] for r in records], "s-", label="CLR (std. dev.)")
    ax.set_xlabel("nearest neighbors k")
    ax.set_ylabel("CLR")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_residual_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    it = np.arange(1, len(report.residual_history) + 1)
    ax.semilogy(it, report.residual_history, "o-")
    ax.set_xlabel("V-cycle")
    ax.set_ylabel("relative residual")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_solution_figure(nodes, u, path, title=None):
    fig, ax = plt.subplots(figsize=(6.5, 6))
    sc = ax.scatter(nodes.coords[:, 0], nodes.coords[:, 1], c=u, s=2.0, cmap="viridis")
    fig.colorbar(sc, ax=ax)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_timing_figure(rows, path):
    """rows: list of dicts with keys method, n_out, seconds."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = sorted({r["method"] for r in rows})
    for m in methods:
        pts = [(r["n_out"], r["seconds"]) for r in rows if r["method"] == m]
        pts.sort()
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=m)
    ax.set_xlabel("subsample size")
    ax.set_ylabel("median seconds")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
