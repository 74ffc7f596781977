"""Figures for delta-versus-epsilon curves.

Figures are written with the non-interactive Agg/SVG backends and fixed SVG
metadata so that repeated runs produce identical files.
"""

from __future__ import annotations

import contextlib
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from egamma_dp.accountant import CurveRow, Method  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "egamma-dp",
    "svg.fonttype": "path",
}

LABELS = {
    Method.THM3: "contraction bound (Laplace)",
    Method.THM4: "contraction bound (Gaussian)",
    Method.THM5: "contraction bound (random stop)",
    Method.PROP1: "Renyi-DP conversion",
}

_FLOOR = 1e-300


@contextlib.contextmanager
def figure_style():
    with plt.rc_context(STYLE):
        yield


def _positive(values):
    return [v if v is not None and v > _FLOOR else float("nan") for v in values]


def plot_curve(rows: Sequence[CurveRow], path, title: str = None) -> Path:
    """Log-scale delta against epsilon; one line per available series."""
    if not rows:
        raise ValueError("no rows to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    eps = [r.epsilon for r in rows]
    method = rows[0].method
    with figure_style():
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        ax.semilogy(eps, _positive(r.delta_thm for r in rows), label=LABELS[method],
                    gid="delta_thm")
        if any(r.delta_baseline is not None for r in rows):
            ax.semilogy(eps, _positive(r.delta_baseline for r in rows), "--",
                        label=LABELS[Method.PROP1], gid="delta_baseline")
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel(r"$\delta$")
        if title is None:
            title = f"record i={rows[0].i} of n={rows[0].n}"
        ax.set_title(title)
        ax.legend(loc="lower left")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
