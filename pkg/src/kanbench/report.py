"""Persisted results store and report emission.

Layout of an output directory::

    results.jsonl                 one RunResult per line, append-only
    report/table.csv              best row per (dataset, model)
    report/widths.csv             every (dataset, model, width) aggregate
    report/report.txt             one text block per dataset
    report/metadata.json          conventions, hyperparameters, failure counts
    report/curves/accuracy_<dataset>_<model>.csv   param_count,mean_accuracy,std
    report/curves/mflops_<dataset>_<model>.csv     param_count,mflops

Everything under ``report/`` is a pure function of ``results.jsonl``.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable

from .bench import BenchmarkReport, RunResult, aggregate_and_select, results_from_jsonl
from .flops import DEFAULT_CONVENTION

RESULTS_FILE = "results.jsonl"
REPORT_DIR = "report"
TABLE_COLUMNS = ["Dataset", "Model", "Accuracy", "F1", "Precision", "Recall", "FPR", "FNR",
                 "Training time (s)", "Width index", "Hidden", "Parameters", "MFLOPS", "Runs"]
SELECTION_NOTE = ("All metrics in a row come from the single width with the highest mean "
                  "accuracy over seeds (ties to the smaller width). Selecting each metric's "
                  "maximum independently across widths is not done.")


class ResultsStore:
    def __init__(self, out_dir: str | os.PathLike):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / RESULTS_FILE

    def load(self) -> tuple[list[RunResult], list[str]]:
        """Latest record per run key, plus warnings for unreadable lines."""
        if not self.path.exists():
            return [], []
        with open(self.path, encoding="utf-8") as fh:
            results, problems = results_from_jsonl(fh)
        latest = {}
        for r in results:
            latest[r.config.key] = r
        return list(latest.values()), problems

    def keys(self) -> set[str]:
        results, _ = self.load()
        return {r.config.key for r in results}

    def append(self, result: RunResult) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(result.to_dict(), sort_keys=True) + "\n")


def _fmt(summary, digits: int = 2) -> str:
    if summary is None:
        return "-"
    return f"{summary.mean:.{digits}f}±{summary.std:.3f}"


def _csv_text(header: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def table_rows(report: BenchmarkReport) -> list[list]:
    rows = []
    for (ds, model), r in sorted(report.best.items()):
        m = r.metrics
        rows.append([ds, model, _fmt(m["accuracy"]), _fmt(m["f1"]), _fmt(m["precision"]),
                     _fmt(m["recall"]), _fmt(m.get("fpr")), _fmt(m.get("fnr")),
                     f"{r.train_seconds.mean:.4f}", r.width_index, r.hidden, r.param_count,
                     f"{r.mflops:.6f}", r.n_ok])
    return rows


def render(report: BenchmarkReport, results: list[RunResult]) -> dict[str, str]:
    """Relative path -> file content for every report artifact."""
    files: dict[str, str] = {}
    files["table.csv"] = _csv_text(TABLE_COLUMNS, table_rows(report))

    width_header = ["dataset", "model", "width_index", "hidden", "param_count", "mflops",
                    "accuracy_mean", "accuracy_std", "f1_mean", "f1_std", "precision_mean",
                    "precision_std", "recall_mean", "recall_std", "fpr_mean", "fpr_std",
                    "fnr_mean", "fnr_std", "train_seconds_mean", "epoch_seconds_mean",
                    "n_ok", "n_failed"]
    width_rows = []
    for r in report.rows:
        vals = [r.dataset, r.model, r.width_index, r.hidden, r.param_count, repr(r.mflops)]
        for name in ("accuracy", "f1", "precision", "recall", "fpr", "fnr"):
            s = r.metrics.get(name)
            vals += [repr(s.mean), repr(s.std)] if s else ["", ""]
        vals += [repr(r.train_seconds.mean), repr(r.epoch_seconds.mean), r.n_ok, r.n_failed]
        width_rows.append(vals)
    files["widths.csv"] = _csv_text(width_header, width_rows)

    pairs = sorted({(r.dataset, r.model) for r in report.rows})
    for ds, model in pairs:
        files[f"curves/accuracy_{ds}_{model}.csv"] = _csv_text(
            ["param_count", "mean_accuracy", "std"],
            [[p, repr(a), repr(s)] for p, a, s in report.accuracy_series(ds, model)])
        files[f"curves/mflops_{ds}_{model}.csv"] = _csv_text(
            ["param_count", "mflops"],
            [[p, repr(f)] for p, f in report.mflops_series(ds, model)])

    lines = []
    for ds in report.datasets:
        lines.append(f"== {ds}")
        lines.append("  " + " | ".join(TABLE_COLUMNS[1:9]))
        for row in table_rows(report):
            if row[0] == ds:
                lines.append("  " + " | ".join(str(v) for v in row[1:9]))
        skipped = [o for o in report.omitted if o[0] == ds]
        for _, model, wi in skipped:
            lines.append(f"  omitted: {model} width index {wi} (all seeds failed)")
        lines.append("")
    files["report.txt"] = "\n".join(lines)

    hyper = sorted({json.dumps({k: v for k, v in r.config.to_dict().items()
                                if k not in ("dataset", "model", "width_index", "hidden", "seed")},
                               sort_keys=True) for r in results})
    meta = {
        "flop_convention": DEFAULT_CONVENTION.to_dict(),
        "hyperparameters": [json.loads(h) for h in hyper],
        "runs_total": len(results),
        "runs_failed": report.failed_runs,
        "omitted_widths": [list(o) for o in report.omitted],
        "datasets": report.datasets,
        "selection_rule": SELECTION_NOTE,
        "averaging": {"binary": "macro", "multiclass": "weighted"},
        "std": "sample standard deviation (n-1) over seeds",
    }
    files["metadata.json"] = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    return files


def write_report(out_dir: str | os.PathLike, results: list[RunResult] | None = None) -> BenchmarkReport:
    out_dir = Path(out_dir)
    if results is None:
        results, _ = ResultsStore(out_dir).load()
    report = aggregate_and_select(results)
    report_dir = out_dir / REPORT_DIR
    for rel, content in render(report, results).items():
        path = report_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    return report
