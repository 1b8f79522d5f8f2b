"""Report figures: grouped bars of mean relative SE drop with p90 ticks.

Rendering is file-only (Agg backend); the color code matches the usual
convention for these comparisons: DNN blue, HS orange, ES green.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

METHOD_COLORS = {"DNN": "tab:blue", "HS": "tab:orange", "ES": "tab:green"}
_PNG_METADATA = {"Software": "beamgap"}  # keep figure bytes run-independent


def render_drop_figure(summary_doc: dict, path) -> str:
    """Grouped bar chart from a summary.json document; returns the path."""
    setups = ["train", "test"]
    methods = list(METHOD_COLORS)
    means = {m: [] for m in methods}
    p90s = {m: [] for m in methods}
    for name in setups:
        rows = {r["method"]: r for r in summary_doc["setups"][name]["methods"]}
        for m in methods:
            means[m].append(rows[m]["mean_drop_pct"])
            p90s[m].append(rows[m]["p90_drop_pct"])

    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    width = 0.22
    centers = [0.0, 1.0]
    for j, m in enumerate(methods):
        xs = [c + (j - 1) * width for c in centers]
        ax.bar(xs, means[m], width=width * 0.9, color=METHOD_COLORS[m], label=m)
        ax.plot(
            xs, p90s[m], linestyle="none", marker="_", markersize=14,
            markeredgewidth=2.0, color="black",
        )
    ax.plot([], [], linestyle="none", marker="_", color="black", label="90th pct")
    ax.set_xticks(centers)
    ax.set_xticklabels([s.capitalize() for s in setups])
    ax.set_ylabel("Relative SE drop vs genie [%]")
    ax.set_title(f"{summary_doc['protocol']} heterogeneity")
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False, ncol=4, fontsize=8)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)
    return str(path)


def render_report_dir(report_dir, out_dir=None) -> list[str]:
    """Render figures for an emitted report directory.

    Reads summary.json and writes fig_drop.png next to it (or under
    ``out_dir`` if given).
    """
    report_dir = Path(report_dir)
    out = Path(out_dir) if out_dir is not None else report_dir
    out.mkdir(parents=True, exist_ok=True)
    doc = json.loads((report_dir / "summary.json").read_text(encoding="utf-8"))
    return [render_drop_figure(doc, out / "fig_drop.png")]
