"""Report emission: JSON, plot-ready TSV tables, and rendered figures.

``emit_report`` writes the full report as ``report.json``, two delimited
tables (``coverage_by_split.tsv``, ``width_by_split.tsv``, one row per
method-split pair), and box-plot renderings of the same two tables next to
them. The JSON is an exact round-trip of the in-memory report; the figures
are a convenience view of the TSV data.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiment import RunReport


def emit_report(report: RunReport, out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Write report artifacts into ``out_dir`` (created if missing).

    Returns the list of files written. Figures can be suppressed for
    headless consumers that only want the data files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "report.json"
    json_path.write_text(report_to_json(report))
    written.append(json_path)

    coverage_rows = _table(report, "coverage")
    width_rows = _table(report, "mean_width")
    for name, rows in (("coverage_by_split.tsv", coverage_rows),
                       ("width_by_split.tsv", width_rows)):
        path = out / name
        lines = ["method\tsplit\tvalue"]
        lines += [f"{m}\t{s}\t{_cell(v)}" for m, s, v in rows]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

    if figures:
        target = report.annotations.get("floor_1_minus_2alpha")
        alpha = None if target is None else (1.0 - target) / 2.0
        written.append(
            _boxplot(coverage_rows, out / "coverage_by_split.png", "coverage",
                     hline=None if alpha is None else 1.0 - alpha)
        )
        written.append(_boxplot(width_rows, out / "width_by_split.png", "mean interval width"))
    return written


def report_to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def _cell(value) -> str:
    if value is None:
        return "inf"
    return repr(float(value))


def _table(report: RunReport, attr: str) -> list[tuple[str, int, float | None]]:
    rows = []
    for result in report.results:
        for split, sr in enumerate(result.splits):
            rows.append((result.method, split, getattr(sr, attr)))
    return rows


def _boxplot(rows, path: Path, ylabel: str, hline: float | None = None) -> Path:
    by_method: dict[str, list[float]] = {}
    for method, _, value in rows:
        if value is not None:
            by_method.setdefault(method, []).append(value)
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * max(1, len(by_method)), 4.0))
    if by_method:
        ax.boxplot(list(by_method.values()), tick_labels=list(by_method.keys()))
    if hline is not None:
        ax.axhline(hline, color="black", linewidth=1.0, label=f"target {hline:g}")
        ax.legend(frameon=False)
    ax.set_ylabel(ylabel)
    ax.set_xlabel("method")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
