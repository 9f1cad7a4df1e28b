"""Figures for experiment reports.

Figures are built on bare :class:`~matplotlib.figure.Figure` objects (no
pyplot state) and saved as SVG with the date stripped and a fixed hash salt,
so reruns produce identical files.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from ..errors import OutputWriteFailed
from .report import ExperimentReport

matplotlib.rcParams["svg.hashsalt"] = "empgauss"

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
}


def _series(report: ExperimentReport, metric: str):
    """family -> sorted list of (n, value, se, reference)."""
    out = defaultdict(list)
    for r in report.rows:
        if r["metric"] == metric and r["n"] is not None:
            out[r["family"]].append((r["n"], r["value"], r["standard_error"], r["reference"]))
    return {k: sorted(v) for k, v in out.items()}


def _save(fig: Figure, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OutputWriteFailed(f"cannot write figure {path}: {exc}") from exc
    return path


def _errorbars(ax, data, label, **kw):
    ns = [d[0] for d in data]
    ys = [d[1] for d in data]
    se = [d[2] or 0.0 for d in data]
    ax.errorbar(ns, ys, yerr=se, marker="o", capsize=2, label=label, **kw)


def plot_bounds(report: ExperimentReport, path: Path) -> Path:
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(9, 3.6))
        axes = fig.subplots(1, 2)
        for ax, metric, name in ((axes[0], "f_sup_mean", "F"), (axes[1], "q_sup_mean", "Q")):
            for i, (fam, data) in enumerate(_series(report, metric).items()):
                color = f"C{i}"
                _errorbars(ax, data, fam, color=color)
                ax.plot([d[0] for d in data], [d[3] for d in data], ls="--", color=color)
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("n")
            ax.set_ylabel(f"E sup deviation of {name} (dashed: bound)")
        axes[0].legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_convergence(report: ExperimentReport, path: Path) -> Path:
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(9, 3.6))
        ax, ax2 = fig.subplots(1, 2)
        for fam, data in _series(report, "f_sup_mean").items():
            slope = report.summary.get(fam, {}).get("slope", math.nan)
            _errorbars(ax, data, f"{fam} (slope {slope:.2f})")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("E sup |F̂ - E F̂|")
        ax.legend(frameon=False)
        for fam, data in _series(report, "as_partial_sum").items():
            ax2.plot([d[0] for d in data], [d[1] for d in data], marker=".", label=fam)
        ax2.set_xscale("log")
        ax2.set_xlabel("n = ⌊γ^i⌋")
        ax2.set_ylabel("partial sum")
        fig.tight_layout()
        return _save(fig, path)


def plot_tails(report: ExperimentReport, path: Path) -> Path:
    metrics = sorted({r["metric"].split("@")[1] for r in report.rows if r["metric"].startswith("uniform_tail@")},
                     key=float)
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(4.5 * max(len(metrics), 1), 3.6))
        axes = fig.subplots(1, max(len(metrics), 1), squeeze=False)[0]
        for ax, thr in zip(axes, metrics):
            for i, fam in enumerate(_series(report, f"uniform_tail@{thr}")):
                color = f"C{i}"
                _errorbars(ax, _series(report, f"uniform_tail@{thr}")[fam], f"{fam} uniform", color=color)
                _errorbars(ax, _series(report, f"pointwise_tail@{thr}")[fam], f"{fam} pointwise",
                           color=color, ls="--")
            ax.set_xscale("log")
            ax.set_xlabel("n")
            ax.set_ylabel(f"P(deviation > {thr})")
            ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def plot_tightness(report: ExperimentReport, path: Path) -> Path:
    by_n = defaultdict(list)
    for r in report.rows:
        if r["metric"] == "ratio":
            delta = report.find(r["family"], r["n"], "target_delta")["value"]
            by_n[r["n"]].append((delta / r["n"], r["value"]))
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(4.5, 3.6))
        ax = fig.subplots()
        for n, pts in sorted(by_n.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"n={n}")
        ax.set_xscale("log")
        ax.set_xlabel("Δ / n")
        ax.set_ylabel("n · E sup |Q̂ - E Q̂| / √Δ")
        ax.set_ylim(bottom=0)
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_delta(report: ExperimentReport, path: Path) -> Path:
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(9, 3.6))
        ax, ax2 = fig.subplots(1, 2)
        for fam, data in _series(report, "delta_over_n2").items():
            ax.plot([d[0] for d in data], [max(d[1], 1e-300) for d in data], marker="o", label=fam)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("Δ(n) / n²")
        ax.legend(frameon=False)
        for fam, data in _series(report, "as_partial_sum").items():
            ax2.plot([d[0] for d in data], [d[1] for d in data], marker=".", label=fam)
        ax2.set_xscale("log")
        ax2.set_xlabel("n = ⌊γ^i⌋")
        ax2.set_ylabel("partial sum")
        fig.tight_layout()
        return _save(fig, path)


def plot_hermite(report: ExperimentReport, path: Path) -> Path:
    cols, rows = report.tables["aggregation"]
    ie, it, ir = cols.index("epsilon"), cols.index("t"), cols.index("relative_residual")
    by_eps = defaultdict(list)
    for r in rows:
        by_eps[r[ie]].append((r[it], r[ir]))
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(4.5, 3.6))
        ax = fig.subplots()
        for eps, pts in sorted(by_eps.items()):
            ax.plot([p[0] for p in pts], [max(p[1], 1e-16) for p in pts], marker="o", label=f"ε={eps:g}")
        ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("relative aggregation residual")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


_PLOTTERS = {
    "verify-bounds": plot_bounds,
    "convergence": plot_convergence,
    "tails": plot_tails,
    "tightness": plot_tightness,
    "delta": plot_delta,
    "hermite-check": plot_hermite,
}


def plot_report(report: ExperimentReport, out_dir) -> list[Path]:
    fn = _PLOTTERS.get(report.kind)
    if fn is None:
        return []
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputWriteFailed(f"cannot create {out_dir}: {exc}") from exc
    return [fn(report, out_dir / f"{report.kind.replace('-', '_')}.svg")]
