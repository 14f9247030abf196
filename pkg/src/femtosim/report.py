"""Curve CSV files and their SVG renderings."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .engine import SweepResult
from .errors import FemtosimError

__all__ = ["CSV_COLUMNS", "CurveRow", "DataError", "FIGURES", "format_curve_csv",
           "write_curve_csv", "read_curve_csv", "figure_for", "render_svg", "plot_csv"]

CSV_COLUMNS = ("sweep_value", "proposed_snir_db", "existing_snir_db", "proposed_throughput_bps",
               "existing_throughput_bps", "proposed_active_fraction", "energy_duty",
               "snir_db_std", "trials")

PROBABILITY_AXIS = "probability that a FAP is in active mode"
COUNT_AXIS = "number of active FAPs"

# figure -> (sweep kind, x label, metric)
FIGURES = {
    "fig4": ("probability", PROBABILITY_AXIS, "snir"),
    "fig5": ("probability", PROBABILITY_AXIS, "throughput"),
    "fig6": ("count", COUNT_AXIS, "snir"),
    "fig7": ("count", COUNT_AXIS, "throughput"),
}


class DataError(FemtosimError):
    """A curve file is missing, empty or malformed."""


@dataclass(frozen=True)
class CurveRow:
    sweep_value: float
    proposed_snir_db: float
    existing_snir_db: float
    proposed_throughput_bps: float
    existing_throughput_bps: float
    proposed_active_fraction: float
    energy_duty: float
    snir_db_std: float
    trials: int


def _g(x: float) -> str:
    return f"{x:.6g}"


def format_curve_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in sorted(result.points, key=lambda p: p.value):
        writer.writerow([
            _g(p.value),
            _g(p.proposed.mean_snir_db),
            _g(p.existing.mean_snir_db),
            _g(p.proposed.mean_throughput_bps),
            _g(p.existing.mean_throughput_bps),
            _g(p.proposed.mean_active_fraction),
            _g(p.proposed.energy_duty),
            _g(p.proposed.std_snir_db),
            str(p.trials),
        ])
    return buf.getvalue()


def write_curve_csv(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_curve_csv(result))


def read_curve_csv(path) -> list[CurveRow]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise DataError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
    if len(rows) == 1:
        raise DataError(f"{path}: no data rows")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise DataError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        try:
            values = [float(v) for v in row[:-1]]
            trials = int(row[-1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric field") from None
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"{path}:{lineno}: non-finite field")
        out.append(CurveRow(*values, trials))
    xs = [r.sweep_value for r in out]
    if xs != sorted(xs):
        raise DataError(f"{path}: rows are not ordered by sweep_value")
    return out


def figure_for(path, rows) -> str:
    """Figure selector from the file name, falling back to the sweep values."""
    m = re.search(r"fig[4-7]", Path(path).name)
    if m:
        return m.group(0)
    xs = [r.sweep_value for r in rows]
    if all(float(x).is_integer() for x in xs) and max(xs) > 1:
        return "fig6"
    return "fig4"


def render_svg(rows, figure: str) -> bytes:
    """Both series of one figure as a self-contained, byte-stable SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind, xlabel, metric = FIGURES[figure]
    xs = [r.sweep_value for r in rows]
    if metric == "snir":
        proposed = [r.proposed_snir_db for r in rows]
        existing = [r.existing_snir_db for r in rows]
        ylabel = "SNIR (dB)"
    else:
        proposed = [r.proposed_throughput_bps / 1e6 for r in rows]
        existing = [r.existing_throughput_bps / 1e6 for r in rows]
        ylabel = "throughput (Mbit/s)"
    with matplotlib.rc_context({"svg.hashsalt": "femtosim", "svg.fonttype": "none",
                                "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(xs, proposed, marker="o", label="proposed on-demand scheme")
        ax.plot(xs, existing, marker="s", linestyle="--", label="existing scheme (all FAPs active)")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def plot_csv(csv_path, out_path, figure: str | None = None) -> str:
    rows = read_curve_csv(csv_path)
    figure = figure or figure_for(csv_path, rows)
    data = render_svg(rows, figure)
    Path(out_path).write_bytes(data)
    return figure
