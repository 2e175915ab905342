"""Render convergence figures from run records to image files.

Uses the Agg backend so figures can be produced headless, next to the CSV.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulation import RunRecord, aggregate_mean


def save_convergence_figure(
    path,
    records_by_rep: list[list[RunRecord]],
    field: str = "mse",
    reference_slope: float | None = None,
    title: str = "",
) -> None:
    """Log-log error-versus-n plot: faint per-replication curves, bold mean.

    When ``reference_slope`` is given, a guide line with that slope is anchored
    at the mean curve's final point.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for records in records_by_rep:
        ns = [r.n for r in records if getattr(r, field) is not None]
        vals = [getattr(r, field) for r in records if getattr(r, field) is not None]
        if ns:
            ax.plot(ns, vals, color="steelblue", alpha=0.2, linewidth=0.8)
    mean_records = aggregate_mean(records_by_rep, field=field)
    ns = [r.n for r in mean_records if getattr(r, field) is not None]
    vals = [getattr(r, field) for r in mean_records if getattr(r, field) is not None]
    if ns:
        ax.plot(ns, vals, color="navy", linewidth=1.8, label=f"mean {field}")
        if reference_slope is not None and vals[-1] > 0:
            anchor_n, anchor_v = ns[-1], vals[-1]
            guide_n = np.array([ns[0], ns[-1]], dtype=float)
            guide_v = anchor_v * (guide_n / anchor_n) ** reference_slope
            ax.plot(
                guide_n,
                guide_v,
                color="black",
                linestyle="--",
                linewidth=1.0,
                label=f"slope {reference_slope:+.3f}",
            )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("observations n")
    ax.set_ylabel(field)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
