"""Depth-map error metrics with median scaling and a depth cap."""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from cmden.errors import InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_CAP = 80.0
MIN_EVAL_DEPTH = 1e-3
METRIC_COLUMNS = ("abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3")
DELTA_BASE = 1.25


@dataclass
class EvalReport:
    """Standard error and accuracy metrics of one depth map."""

    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    valid_pixel_count: int
    applied_scale: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    def metrics(self) -> tuple[float, ...]:
        """Metric values in table column order."""
        return tuple(getattr(self, name) for name in METRIC_COLUMNS)


def compute_errors(pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    """Metrics on flat arrays of matched, positive depths."""
    ratio = np.maximum(pred / gt, gt / pred)
    diff = pred - gt
    return {
        "abs_rel": float(np.mean(np.abs(diff) / gt)),
        "sq_rel": float(np.mean(diff**2 / gt)),
        "rmse": float(np.sqrt(np.mean(diff**2))),
        "rmse_log": float(np.sqrt(np.mean((np.log(pred) - np.log(gt)) ** 2))),
        "delta1": float(np.mean(ratio < DELTA_BASE)),
        "delta2": float(np.mean(ratio < DELTA_BASE**2)),
        "delta3": float(np.mean(ratio < DELTA_BASE**3)),
    }


def valid_pixels(
    pred: np.ndarray, gt: np.ndarray, valid: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Check shapes and return ``(pred, gt, valid)`` as float/bool arrays.

    Without an explicit mask, pixels with finite, positive ground truth are valid.

    Raises:
        InvalidInputError: On shape mismatch, no valid pixel, or a
            non-finite prediction on a valid pixel.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise InvalidInputError(
            f"prediction shape {pred.shape} does not match ground truth {gt.shape}"
        )
    usable = np.isfinite(gt) & (gt > 0)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != gt.shape:
            raise InvalidInputError(f"validity shape {valid.shape} does not match {gt.shape}")
        usable &= valid
    if not usable.any():
        raise InvalidInputError("no valid ground-truth pixels to evaluate")
    if not np.all(np.isfinite(pred[usable])):
        raise InvalidInputError("prediction is not finite on valid pixels")
    return pred, gt, usable


def median_scale_factor(pred: np.ndarray, gt: np.ndarray) -> float:
    """``median(gt) / median(pred)`` over matched pixels."""
    denominator = float(np.median(pred))
    if denominator <= 0:
        raise InvalidInputError(f"median prediction {denominator} is not positive")
    return float(np.median(gt)) / denominator


def prepare(
    pred: np.ndarray,
    gt: np.ndarray,
    valid: Optional[np.ndarray] = None,
    cap: float = DEFAULT_CAP,
    median_scale: bool = True,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Matched, scaled and clamped ``(pred, gt)`` values plus the scale used."""
    if cap <= MIN_EVAL_DEPTH:
        raise InvalidInputError(f"cap must exceed {MIN_EVAL_DEPTH}, got {cap}")
    pred, gt, usable = valid_pixels(pred, gt, valid)
    p = pred[usable]
    g = gt[usable]
    scale = median_scale_factor(p, g) if median_scale else 1.0
    p = np.clip(p * scale, MIN_EVAL_DEPTH, cap)
    g = np.clip(g, MIN_EVAL_DEPTH, cap)
    return p, g, scale


def evaluate(
    pred: np.ndarray,
    gt: np.ndarray,
    valid: Optional[np.ndarray] = None,
    cap: float = DEFAULT_CAP,
    median_scale: bool = True,
) -> EvalReport:
    """Compare a predicted depth map against ground truth.

    Args:
        pred: Predicted depth, same shape as ``gt``.
        gt: Ground-truth depth; non-positive or non-finite entries are
            treated as missing.
        valid: Optional extra mask of pixels to evaluate.
        cap: Both maps are clamped to ``[1e-3, cap]`` before the metrics.
        median_scale: Rescale the prediction by ``median(gt)/median(pred)``
            over the valid pixels first.

    Returns:
        An :class:`EvalReport`.

    Raises:
        InvalidInputError: If no pixel is valid or the shapes differ.
    """
    p, g, scale = prepare(pred, gt, valid, cap, median_scale)
    return EvalReport(**compute_errors(p, g), valid_pixel_count=int(p.size), applied_scale=scale)
