"""Sweep figures: median risks and forgetting ratio against the feature count.

Rendered with matplotlib's SVG backend next to the delimited outputs; the
hash salt and empty date metadata keep the file reproducible byte-for-byte.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiments import PointAggregate


def render_sweep_figure(aggregates: list[PointAggregate], path, *, title: str | None = None) -> None:
    """Two-panel log-x line plot: median risks on top, median ratio below."""
    with plt.rc_context({"svg.hashsalt": "linforget-sweep"}):
        fig, (ax_risk, ax_ratio) = plt.subplots(2, 1, figsize=(7.0, 7.0), sharex=True)
        variants = sorted({a.variant for a in aggregates})
        for variant in variants:
            rows = sorted((a for a in aggregates if a.variant == variant), key=lambda a: a.p)
            ps = [a.p for a in rows]
            suffix = f" ({variant})" if len(variants) > 1 else ""
            ax_risk.plot(ps, [a.stats["r_a"]["median"] for a in rows],
                         marker="o", label="task A fit" + suffix)
            ax_risk.plot(ps, [a.stats["r_ba"]["median"] for a in rows],
                         marker="s", label="sequential fit" + suffix)
            ratio_rows = [a for a in rows if a.ratio_undefined_count < a.trials - a.failed_count]
            if ratio_rows:
                ax_ratio.plot([a.p for a in ratio_rows],
                              [a.stats["ratio"]["median"] for a in ratio_rows],
                              marker="d", color="C3", label="forgetting ratio" + suffix)
        ax_risk.set_xscale("log")
        ax_risk.set_yscale("log")
        ax_risk.set_ylabel("median risk on task A")
        ax_risk.legend(loc="best")
        ax_risk.grid(True, which="both", alpha=0.3)
        ax_ratio.set_xscale("log")
        ax_ratio.set_yscale("log")
        ax_ratio.set_xlabel("feature dimension p")
        ax_ratio.set_ylabel("median forgetting ratio")
        ax_ratio.legend(loc="best")
        ax_ratio.grid(True, which="both", alpha=0.3)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
