"""Depth-map metrics, depth-binned accuracy and report tables."""

from cmden.evaluation.binned import BinnedAccuracy, DepthBin, binned_accuracy
from cmden.evaluation.metrics import DEFAULT_CAP, METRIC_COLUMNS, EvalReport, evaluate
from cmden.evaluation.tables import (
    aggregate_reports,
    format_report_table,
    write_binned_csv,
    write_reports_csv,
)

__all__ = [
    "BinnedAccuracy",
    "DEFAULT_CAP",
    "DepthBin",
    "EvalReport",
    "METRIC_COLUMNS",
    "aggregate_reports",
    "binned_accuracy",
    "evaluate",
    "format_report_table",
    "write_binned_csv",
    "write_reports_csv",
]
