"""Aggregation and tabular output of evaluation reports."""

import csv
import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from cmden.errors import InvalidInputError
from cmden.evaluation.binned import BIN_METRICS, BinnedAccuracy
from cmden.evaluation.metrics import METRIC_COLUMNS, EvalReport

logger = logging.getLogger(__name__)

COLUMN_TITLES = {
    "abs_rel": "Abs Rel",
    "sq_rel": "Sq Rel",
    "rmse": "RMSE",
    "rmse_log": "RMSE log",
    "delta1": "d<1.25",
    "delta2": "d<1.25^2",
    "delta3": "d<1.25^3",
}


def aggregate_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Mean of per-frame metrics; pixel counts are summed."""
    if not reports:
        raise InvalidInputError("no reports to aggregate")
    means = {name: float(np.mean([getattr(r, name) for r in reports])) for name in METRIC_COLUMNS}
    return EvalReport(
        **means,
        valid_pixel_count=sum(r.valid_pixel_count for r in reports),
        applied_scale=float(np.mean([r.applied_scale for r in reports])),
    )


def format_report_table(rows: Sequence[tuple[str, EvalReport]], precision: int = 4) -> str:
    """Aligned plain-text table, one row per named report."""
    header = ["name"] + [COLUMN_TITLES[c] for c in METRIC_COLUMNS]
    body = [[name] + [f"{v:.{precision}f}" for v in report.metrics()] for name, report in rows]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = []
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells))
    return "\n".join(lines)


def write_reports_csv(path: Path, rows: Sequence[tuple[str, EvalReport]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["name", *METRIC_COLUMNS, "valid_pixel_count", "applied_scale"])
        for name, report in rows:
            metrics = [repr(v) for v in report.metrics()]
            writer.writerow(
                [name, *metrics, report.valid_pixel_count, repr(report.applied_scale)]
            )
    logger.debug(f"Wrote {len(rows)} evaluation rows to {path}")
    return path


def write_binned_csv(path: Path, results: Mapping[str, BinnedAccuracy]) -> Path:
    """One row per (name, bin); empty bins leave their metric cells blank."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["name", "lower", "upper", "count", *BIN_METRICS])
        for name, binned in results.items():
            for b in binned.bins:
                values = ["" if getattr(b, m) is None else repr(getattr(b, m)) for m in BIN_METRICS]
                writer.writerow([name, repr(b.lower), repr(b.upper), b.count, *values])
    logger.debug(f"Wrote binned accuracy to {path}")
    return path
