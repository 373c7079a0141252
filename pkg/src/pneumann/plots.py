"""Figure rendering for the report paths of the CLI.

Every figure is written next to its delimited twin so a run directory is
self-describing: profile.csv + profile.png, sweep.csv + sweep.png, and so
on.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def save_profile_figure(path, r, u, du, label="u"):
    """Solution profile and its slope on twin axes."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(r, u, color="tab:blue", label=f"{label}(r)")
    ax.set_xlabel("r")
    ax.set_ylabel(f"{label}(r)", color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(r, du, color="tab:orange", alpha=0.8, label=f"{label}'(r)")
    ax2.set_ylabel(f"{label}'(r)", color="tab:orange")
    ax2.tick_params(axis="y", labelcolor="tab:orange")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_sweep_figure(path, rows, c_infty):
    """Level and distance convergence against the exponent."""
    ok = [row for row in rows if row.status == "ok"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    if ok:
        qs = [row.q for row in ok]
        ax1.plot(qs, [row.c_q for row in ok], "o-", label="c_q")
        ax1.axhline(c_infty, color="gray", linestyle="--", label="limit level")
        ax1.set_xlabel("q")
        ax1.set_ylabel("level")
        ax1.set_xscale("log")
        ax1.legend()
        ax1.grid(alpha=0.3)
        ax2.plot(qs, [row.sup_dist_G for row in ok], "s-", label="sup distance to G")
        ax2.plot(
            qs,
            [abs(row.h_q_G - 1.0) for row in ok],
            "^-",
            label="|h_q(G) - 1|",
        )
        ax2.set_xlabel("q")
        ax2.set_xscale("log")
        ax2.set_yscale("log")
        ax2.legend()
        ax2.grid(alpha=0.3)
    failed = [row for row in rows if row.status != "ok"]
    if failed:
        note = ", ".join(f"q={row.q:g}: {row.status}" for row in failed)
        fig.suptitle(f"rows without a nonconstant solution: {note}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_flow_figure(path, energies):
    """Energy decay along a polygonal flow trajectory."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(np.arange(len(energies)), energies, color="tab:green")
    ax.set_xlabel("step")
    ax.set_ylabel("energy")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
