"""Structured run reports: per-check verdicts, series artifacts, JSON/CSV
emission, and matplotlib renderings of every series.

Reports are deterministic for a fixed config + seed: the JSON is emitted
with sorted keys and the only non-reproducible field is ``timing_s``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Verdict:
    name: str
    measured: float
    threshold: float
    comparison: str  # "<=", ">=", or "exact"
    passed: bool


def check(name: str, measured, threshold, comparison: str = "<=") -> Verdict:
    m = float(measured)
    t = float(threshold)
    if comparison == "<=":
        ok = m <= t
    elif comparison == ">=":
        ok = m >= t
    elif comparison == "exact":
        ok = m == t
    else:
        raise ValueError(f"unknown comparison {comparison!r}")
    return Verdict(name, m, t, comparison, ok)


@dataclass
class Series:
    headers: list[str]
    rows: list[tuple]


@dataclass
class RunReport:
    subcommand: str
    config: dict
    seed: int
    verdicts: list[Verdict] = field(default_factory=list)
    series: dict[str, Series] = field(default_factory=dict)
    timing_s: float = 0.0

    def add(self, verdict: Verdict):
        self.verdicts.append(verdict)

    def add_series(self, name: str, headers: list[str], rows):
        self.series[name] = Series(list(headers), [tuple(r) for r in rows])

    @property
    def all_pass(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "verdicts": [
                {
                    "name": v.name,
                    "measured": v.measured,
                    "threshold": v.threshold,
                    "comparison": v.comparison,
                    "passed": v.passed,
                }
                for v in self.verdicts
            ],
            "all_pass": self.all_pass,
            "series_files": sorted(f"{k}.csv" for k in self.series),
            "timing_s": self.timing_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def emit_plot_data(report: RunReport, outdir: Path) -> list[Path]:
    """One CSV per series, header row first; deterministic names."""
    paths = []
    for name in sorted(report.series):
        s = report.series[name]
        path = outdir / f"{_slug(name)}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(s.headers)
            w.writerows(s.rows)
        paths.append(path)
    return paths


def render_figures(report: RunReport, outdir: Path) -> list[Path]:
    """A PNG per series, log-scaled on the y axis when all values allow."""
    paths = []
    for name in sorted(report.series):
        s = report.series[name]
        if len(s.headers) < 2 or not s.rows:
            continue
        xs = [float(r[0]) for r in s.rows]
        ys = [float(r[-1]) for r in s.rows]
        fig, ax = plt.subplots(figsize=(5, 3.4))
        logy = all(y > 0 for y in ys) and max(ys) / max(min(ys), 1e-300) > 50
        logx = all(x > 0 for x in xs) and max(xs) / max(min(xs), 1e-300) > 50
        ax.plot(xs, ys, marker="o", ms=3)
        if logy:
            ax.set_yscale("log")
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(s.headers[0])
        ax.set_ylabel(s.headers[-1])
        ax.set_title(name)
        fig.tight_layout()
        path = outdir / f"{_slug(name)}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths


def write_report(report: RunReport, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    emit_plot_data(report, outdir)
    render_figures(report, outdir)
    path = outdir / "report.json"
    path.write_text(report.to_json())
    return path
