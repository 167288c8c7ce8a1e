"""Render experiment curves to PNG with a non-interactive backend.

Figures are convenience output.  The two-column data files written next to
them are the authoritative, byte-deterministic record.
"""

from __future__ import annotations

from collections import OrderedDict
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "legend.frameon": False,
    "legend.fontsize": 7,
}

# beyond this many curves the legend is dropped to keep the plot readable
MAX_LEGEND = 8


def render(series: Iterable, out_dir: str | Path) -> list[Path]:
    """One PNG per ``figure`` group; returns the written paths in group order."""
    groups: "OrderedDict[str, list]" = OrderedDict()
    for s in series:
        groups.setdefault(s.figure, []).append(s)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(STYLE):
        for name, curves in groups.items():
            fig, ax = plt.subplots()
            for c in curves:
                ax.plot(c.x, c.y, marker="o", label=getattr(c, "label", "") or c.name)
            first = curves[0]
            ax.set_xlabel(first.xlabel)
            ax.set_ylabel(first.ylabel)
            if first.logx:
                ax.set_xscale("log")
            if len(curves) > 4 and len(curves) <= MAX_LEGEND:
                # many curves: keep the legend clear of the data
                ax.legend(loc="center left", bbox_to_anchor=(1.0, 0.5))
            elif len(curves) > 1:
                ax.legend()
            fig.tight_layout()
            path = out_dir / f"{name}.png"
            fig.savefig(path, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
    return written
