"""CSV writing and deterministic plot data."""

from __future__ import annotations

import csv
import math
from pathlib import Path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def emit_plots(report, out) -> list[Path]:
    """Write one two-column ``.dat`` per series and one SVG per check.

    Raises ``ValueError`` on an empty report before writing anything.
    """
    series = report.series()
    if not series:
        raise ValueError(f"{report.check}: nothing to plot")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, pts in series.items():
        p = out / f"{report.check}_{key}.dat"
        with p.open("w") as fh:
            for x, y in pts:
                fh.write(f"{_fmt(float(x))} {_fmt(float(y))}\n")
        paths.append(p)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "pqnorms", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for key, pts in series.items():
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=key)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("dimension")
        ax.set_ylabel("value" if report.check == "concentration" else "ratio")
        ax.set_title(report.check)
        if len(series) <= 16:
            ax.legend(fontsize="x-small")
        svg = out / f"{report.check}.svg"
        fig.savefig(svg, format="svg", metadata={"Date": None})
        plt.close(fig)
    paths.append(svg)
    return paths
