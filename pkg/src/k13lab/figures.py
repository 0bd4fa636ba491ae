"""Headless figure rendering for the command-line reports.

Every renderer writes a PNG next to the delimited output of its subcommand.
Matplotlib is forced onto the Agg backend at import, so these work in any
environment with no display.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def blowup_figure(path, eps_values, numeric, closed_form) -> None:
    """Total energy against the inverse layer scale, numeric vs exact."""
    inv = 1.0 / np.asarray(eps_values, float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(inv, closed_form, "k-", lw=1.2, label="closed form")
    ax.plot(inv, numeric, "o--", color="tab:red", ms=6, label="lattice")
    ax.set_xlabel(r"$1/\varepsilon$")
    ax.set_ylabel("total energy")
    ax.set_title("boundary-layer family: unbounded below")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def decay_figure(path, results) -> None:
    """Log-log clipped energy integral vs radius, one line per center."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for res in results:
        p = res.profile
        ints = p.radii * p.values
        keep = ints > 0
        label = (f"({p.center[0]:+.2f},{p.center[1]:+.2f},{p.center[2]:+.2f})"
                 f"  slope {res.exponent:.2f}")
        ax.loglog(p.radii[keep], ints[keep], "o-", ms=4, label=label)
    ax.set_xlabel("clip radius r")
    ax.set_ylabel(r"$\int_{C_r} |\nabla u|^2$")
    ax.set_title("local energy decay")
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def trace_figure(path, trace) -> None:
    """Energy and gradient norm per iteration of a descent run."""
    it = np.arange(len(trace.energies))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(it, trace.energies, "-", color="tab:blue", label="energy")
    ax.set_xlabel("iteration")
    ax.set_ylabel("energy", color="tab:blue")
    ax2 = ax.twinx()
    gn = np.asarray(trace.grad_norms)
    ax2.semilogy(np.arange(len(gn)), np.maximum(gn, 1e-300), "-",
                 color="tab:orange", label="|grad|")
    ax2.set_ylabel("gradient sup norm", color="tab:orange")
    ax.set_title(f"descent: {trace.reason} ({trace.iterations} steps)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def bounds_figure(path, reports) -> None:
    """Horizontal margin bars, one per verified inequality."""
    names = [r.name for r in reports]
    margins = [r.margin for r in reports]
    colors = ["tab:green" if m >= 0 else "tab:red" for m in margins]
    fig, ax = plt.subplots(figsize=(6.5, 0.6 * len(reports) + 1.6))
    y = np.arange(len(reports))
    ax.barh(y, margins, color=colors, height=0.6)
    ax.axvline(0.0, color="k", lw=1)
    ax.set_yticks(y, names, fontsize=9)
    ax.set_xlabel("margin = cap - measured")
    ax.set_title("inequality margins")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def alignment_figure(path, distances, residual_max=None) -> None:
    """Histogram of the boundary-alignment distances to {-1, 0, +1}."""
    d = np.asarray(distances, float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if len(d):
        ax.hist(np.log10(np.maximum(d, 1e-17)), bins=40, color="tab:purple")
    ax.set_xlabel(r"$\log_{10}$ distance of $u\cdot\nu$ to $\{0,\pm 1\}$")
    ax.set_ylabel("surface nodes")
    title = "boundary alignment"
    if residual_max is not None:
        title += f"  (interior residual max {residual_max:.3e})"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def ledger_figure(path, data) -> None:
    """Vortex winding ledger of one closed-surface boundary field."""
    w = [v.winding for v in data.vortices]
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    if w:
        ax.bar(np.arange(len(w)), w,
               color=["tab:green" if x > 0 else "tab:red" for x in w])
    ax.axhline(0, color="k", lw=1)
    ax.set_xlabel("vortex record")
    ax.set_ylabel("winding")
    ax.set_title(f"genus {data.genus}: ledger sum {data.ledger_sum()}"
                 f" vs Euler characteristic {data.chi}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
