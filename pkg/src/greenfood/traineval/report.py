"""CSV and JSON report files.

``report.csv`` has one row per run per cutoff. Columns, in order:

- grid coordinates of the run (ablations only, e.g. ``alpha``)
- ``split``, ``cutoff``, ``hr``, ``ndcg``
- ``mean_<name>`` raw indicator mean of the top-N lists, per indicator
- ``green_<name>`` normalized greener-is-higher mean, per indicator
- ``mean_greenness`` average of the ``green_`` columns
- ``seed``, ``epoch``, ``config_hash``

``report.json`` holds ``{"runs": [{"coords": {...}, "report": {...}}]}``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

from .metrics import EvalReport

META_COLUMNS = ("seed", "epoch", "config_hash")


class ReportError(OSError):
    pass


def _norm_runs(reports) -> list:
    if isinstance(reports, EvalReport):
        reports = [({}, reports)]
    runs = [(dict(c), r) for c, r in reports]
    if not runs:
        raise ValueError("no reports to emit")
    return runs


def report_rows(reports) -> tuple:
    """``(columns, rows)`` of the tidy table."""
    runs = _norm_runs(reports)
    coord_cols = []
    for coords, _ in runs:
        coord_cols += [k for k in coords if k not in coord_cols]
    names = list(next(iter(runs[0][1].cutoffs.values())).indicators)
    columns = (coord_cols + ["split", "cutoff", "hr", "ndcg"] + [f"mean_{n}" for n in names]
               + [f"green_{n}" for n in names] + ["mean_greenness"] + list(META_COLUMNS))
    rows = []
    for coords, report in runs:
        for cutoff, m in sorted(report.cutoffs.items()):
            row = {c: coords.get(c, "") for c in coord_cols}
            row.update(split=report.split, cutoff=cutoff, hr=m.hr, ndcg=m.ndcg)
            row.update({f"mean_{n}": m.indicators[n] for n in names})
            row.update({f"green_{n}": m.greenness[n] for n in names})
            row["mean_greenness"] = m.mean_greenness if names else ""
            row.update({c: report.metadata.get(c, "") for c in META_COLUMNS})
            rows.append(row)
    return columns, rows


def _open(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from None


def emit_report(reports, out_dir, stem: str = "report") -> dict:
    """Write ``<stem>.csv`` and ``<stem>.json``; returns their paths.

    ``reports`` is an EvalReport or a list of ``(coords, EvalReport)``.
    """
    runs = _norm_runs(reports)
    out_dir = Path(out_dir)
    columns, rows = report_rows(runs)
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    with _open(csv_path) as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    payload = {"runs": [{"coords": c, "report": r.to_dict()} for c, r in runs]}
    with _open(json_path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": csv_path, "json": json_path}


def load_report_json(path) -> list:
    """Inverse of the JSON half of ``emit_report``: ``[(coords, EvalReport)]``."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(run["coords"], EvalReport.from_dict(run["report"])) for run in raw["runs"]]


def write_training_log(history, path) -> Path:
    """``epoch, loss, normal_loss, green_loss, valid_hr10, valid_ndcg10`` per epoch."""
    path = Path(path)
    rows = [asdict(h) for h in history]
    fields = ["epoch", "loss", "normal_loss", "green_loss", "valid_hr10", "valid_ndcg10"]
    with _open(path) as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return path
