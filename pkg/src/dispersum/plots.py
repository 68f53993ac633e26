"""Summary figures for benchmark runs.

Two plots mirror the standard way this method is reported: average solve
time (log scale) and average cut count, against the coordinate dimension s
when the suite sweeps it, otherwise against n.  One line per solver mode.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first

from .bench import BenchRow


def render_bench_figures(rows: Sequence[BenchRow], stem: str) -> list[str]:
    """Write <stem>_time.png and <stem>_cuts.png; returns the paths."""
    ok = [r for r in rows if r.status != "error"]
    if not ok:
        return []
    s_values = {r.s for r in ok if r.s is not None}
    sweep_s = len(s_values) > 1
    xlabel = "coordinate dimension s" if sweep_s else "instance size n"

    def xval(r: BenchRow):
        return r.s if sweep_s else r.n

    usable = [r for r in ok if xval(r) is not None]
    if not usable:
        return []

    paths = []
    for metric, fname, ylabel, logy in (
        (lambda r: r.time_ms / 1000.0, "time", "average solve time [s]", True),
        (lambda r: r.cuts, "cuts", "average cuts in pool", False),
    ):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for mode in sorted({r.mode for r in usable}):
            pts: dict[float, list[float]] = {}
            for r in usable:
                if r.mode == mode:
                    pts.setdefault(xval(r), []).append(metric(r))
            xs = sorted(pts)
            ys = [sum(pts[x]) / len(pts[x]) for x in xs]
            ax.plot(xs, ys, marker="o", label=mode)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = f"{stem}_{fname}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        paths.append(os.path.abspath(out))
    return paths
