"""Comparison tables and learning-curve export from run directories."""

from __future__ import annotations

import csv
import io
from pathlib import Path

REPORT_COLUMNS = ("run", "model", "params", "test_ce", "test_accuracy")


class ReportError(ValueError):
    pass


def _read_csv(path: Path) -> list[dict[str, str]]:
    if not path.is_file():
        raise ReportError(f"missing artifact {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def final_stage(run_dir: str | Path) -> dict[str, str]:
    """Model name, parameter count and last-epoch test metrics of the run's final model stage."""
    run = Path(run_dir)
    models = _read_csv(run / "models.csv")
    metrics = _read_csv(run / "metrics.csv")
    for entry in reversed(models):
        rows = [r for r in metrics if r["stage"] == entry["stage"] and r["split"] == "test"]
        if rows:
            last = max(rows, key=lambda r: int(r["epoch"]))
            return {
                "run": run.name,
                "model": entry["model"],
                "params": entry["params"],
                "test_ce": last["ce"],
                "test_accuracy": last["accuracy"],
            }
    raise ReportError(f"{run} has no stage with test metrics")


def report(run_dirs: list[str], csv_path: str | None = None) -> str:
    """Aligned text table (returned) and optionally the same rows as CSV."""
    rows = [final_stage(d) for d in run_dirs]
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, REPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    table = [list(REPORT_COLUMNS)]
    for r in rows:
        table.append([r["run"], r["model"], r["params"], f"{float(r['test_ce']):.4f}", f"{100 * float(r['test_accuracy']):.2f}%"])
    widths = [max(len(row[i]) for row in table) for i in range(len(REPORT_COLUMNS))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n" for row in table)


def export_curves(run_dir: str | Path, stage: str | None = None) -> str:
    """Long-format ``epoch,split,metric,value`` CSV; values are copied verbatim from metrics.csv."""
    metrics = _read_csv(Path(run_dir) / "metrics.csv")
    if not metrics:
        raise ReportError(f"{run_dir} has no metrics")
    if stage is None:
        stage = metrics[-1]["stage"]
    rows = [r for r in metrics if r["stage"] == stage]
    if not rows:
        raise ReportError(f"{run_dir} has no metrics for stage {stage!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("epoch", "split", "metric", "value"))
    for metric in ("ce", "accuracy"):
        for r in rows:
            w.writerow((r["epoch"], r["split"], metric, r[metric]))
    return buf.getvalue()
