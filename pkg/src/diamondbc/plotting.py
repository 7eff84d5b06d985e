"""Static SVG line charts for sweep outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

SERIES_ORDER = ["df", "af", "daf", "cf", "cutset", "rc", "dfub"]
_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]


def series_color(tag: str) -> str:
    try:
        return _PALETTE[SERIES_ORDER.index(tag)]
    except ValueError:
        return "#7f7f7f"


def render_sweep(rows: list[dict], path: Path, metric: str) -> None:
    """One polyline per series, 960x600 SVG, colors fixed by scheme order."""
    series: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        v = row["value_nats"]
        if not isinstance(v, float) or v != v:  # skip NaN sentinels
            continue
        series.setdefault(row["scheme"], []).append((row["pr_db"], v))

    matplotlib.rcParams["svg.hashsalt"] = "diamondbc"
    # the svg backend emits the figure size in points: 960 x 600
    fig, ax = plt.subplots(figsize=(960.0 / 72.0, 600.0 / 72.0))
    ordered = sorted(series.items(), key=lambda kv: (
        SERIES_ORDER.index(kv[0]) if kv[0] in SERIES_ORDER else len(SERIES_ORDER)
    ))
    for tag, pts in ordered:
        pts.sort()
        ax.plot([q[0] for q in pts], [q[1] for q in pts],
                label=tag, color=series_color(tag), linewidth=1.6)
    ax.set_xlabel("relay power  $P_r$  [dB]")
    ax.set_ylabel(f"{metric} [nats]")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
