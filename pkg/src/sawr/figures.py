"""Figure rendering for experiment reports (used by the report CLI path)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ExperimentReport

_METRIC_LABELS = {
    "probability": "probability of finding a lower energy state",
    "mean_improvement": "mean improvement over improved trials",
}
_MARKERS = ("o", "s", "^", "D", "v")


def render_report_figures(report: ExperimentReport, outdir, dpi: int = 150) -> list[str]:
    """Render one PNG per metric (x = Chimera size, one series per method)."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for metric, label in _METRIC_LABELS.items():
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for m, method in enumerate(report.methods):
            xs, ys = [], []
            for a in report.aggregates:
                value = getattr(a, metric)
                if a.method == method and value is not None:
                    xs.append(a.size)
                    ys.append(value)
            if xs:
                ax.plot(xs, ys, marker=_MARKERS[m % len(_MARKERS)], label=method)
        ax.set_xlabel("Chimera grid side n")
        ax.set_ylabel(label)
        if metric == "probability":
            ax.set_ylim(-0.05, 1.05)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = os.path.join(outdir, f"{metric}.png")
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        paths.append(path)
    return paths
