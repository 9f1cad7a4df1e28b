"""Report containers and their CSV/JSON serialization.

Outputs carry no timestamps or host data, so identical configurations give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import OutputWriteFailed

SCHEMA_VERSION = "1.0"
CSV_COLUMNS = ("family", "n", "metric", "value", "standard_error", "reference", "passed")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    standard_error: float
    R: int
    values: np.ndarray | None = None

    @classmethod
    def from_values(cls, values, keep: bool = False) -> "MCEstimate":
        v = np.asarray(values, dtype=float)
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se, int(v.size), v if keep else None)

    def upper(self, k: float = 3.0) -> float:
        return self.mean + k * self.standard_error


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)
    replications: list[dict] = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)

    def add(self, family: str, n, metric: str, value, standard_error=None,
            reference=None, passed=None) -> None:
        self.rows.append({
            "family": family, "n": n, "metric": metric, "value": value,
            "standard_error": standard_error, "reference": reference, "passed": passed,
        })

    def find(self, family: str, n, metric: str) -> dict:
        for r in self.rows:
            if r["family"] == family and r["n"] == n and r["metric"] == metric:
                return r
        raise KeyError((family, n, metric))

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.config,
            "rows": self.rows,
            "summary": self.summary,
            "violations": self.violations,
        }
        if self.tables:
            payload["tables"] = {k: {"columns": c, "rows": r} for k, (c, r) in self.tables.items()}
        return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def replications_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ("family", "n", "seed", "replication", "sup_value", "method", "certified_error")
        w.writerow(cols)
        for r in self.replications:
            w.writerow([_cell(r[c]) for c in cols])
        return buf.getvalue()

    def table_csv(self, name: str) -> str:
        cols, rows = self.tables[name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_report(report: ExperimentReport, out_dir, fmt: str = "csv") -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        stem = report.kind.replace("-", "_")
        if fmt == "json":
            p = out_dir / f"{stem}.json"
            p.write_text(report.to_json())
        else:
            p = out_dir / f"{stem}.csv"
            p.write_text(report.to_csv())
            meta = out_dir / f"{stem}_summary.json"
            meta.write_text(ExperimentReport(report.kind, report.config, [], report.summary,
                                             report.violations).to_json())
            written.append(meta)
        written.insert(0, p)
        if report.replications:
            r = out_dir / f"{stem}_replications.csv"
            r.write_text(report.replications_csv())
            written.append(r)
        for name in sorted(report.tables):
            t = out_dir / f"{stem}_{name}.csv"
            t.write_text(report.table_csv(name))
            written.append(t)
    except OSError as exc:
        raise OutputWriteFailed(f"cannot write to {out_dir}: {exc}") from exc
    return written
