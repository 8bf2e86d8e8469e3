"""Accuracy as a function of ground-truth depth."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from cmden.errors import InvalidInputError
from cmden.evaluation.metrics import DEFAULT_CAP, compute_errors, prepare

logger = logging.getLogger(__name__)

BIN_METRICS = ("abs_rel", "rmse", "rmse_log", "delta1")


@dataclass
class DepthBin:
    lower: float
    upper: float
    count: int
    abs_rel: Optional[float] = None
    rmse: Optional[float] = None
    rmse_log: Optional[float] = None
    delta1: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "count": self.count,
            **{name: getattr(self, name) for name in BIN_METRICS},
        }


@dataclass
class BinnedAccuracy:
    """Per-bin metrics of one prediction.

    Bins are disjoint. ``excluded`` counts valid pixels outside every bin,
    so ``total_count + excluded`` always equals the number of valid pixels,
    also when the edges do not span the ground-truth range.
    """

    edges: list[float]
    bins: list[DepthBin] = field(default_factory=list)
    excluded: int = 0
    applied_scale: float = 1.0

    @property
    def total_count(self) -> int:
        return sum(b.count for b in self.bins)

    def to_dict(self) -> dict:
        return {
            "edges": list(self.edges),
            "bins": [b.to_dict() for b in self.bins],
            "excluded": self.excluded,
            "applied_scale": self.applied_scale,
        }


def check_edges(edges: Sequence[float]) -> list[float]:
    values = [float(e) for e in edges]
    if len(values) < 2:
        raise InvalidInputError(f"need at least two bin edges, got {values}")
    if not all(np.isfinite(values)):
        raise InvalidInputError(f"bin edges must be finite, got {values}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidInputError(f"bin edges must be strictly increasing, got {values}")
    return values


def binned_accuracy(
    pred: np.ndarray,
    gt: np.ndarray,
    bin_edges: Sequence[float],
    valid: Optional[np.ndarray] = None,
    cap: float = DEFAULT_CAP,
    median_scale: bool = True,
) -> BinnedAccuracy:
    """Bucket pixels by ground-truth depth and score each bucket.

    One global median scale is applied before bucketing. Bins are
    ``[e_k, e_k+1)`` except the last, which also includes its upper edge.
    Empty bins are reported with count 0 and no metrics.

    Raises:
        InvalidInputError: On unordered edges or no valid pixels.
    """
    edges = check_edges(bin_edges)
    p, g, scale = prepare(pred, gt, valid, cap, median_scale)
    result = BinnedAccuracy(edges=edges, applied_scale=scale)
    covered = np.zeros(g.shape, dtype=bool)
    last = len(edges) - 2
    for k, (lower, upper) in enumerate(zip(edges, edges[1:])):
        in_bin = (g >= lower) & ((g <= upper) if k == last else (g < upper))
        covered |= in_bin
        count = int(in_bin.sum())
        if count == 0:
            result.bins.append(DepthBin(lower=lower, upper=upper, count=0))
            continue
        errors = compute_errors(p[in_bin], g[in_bin])
        result.bins.append(
            DepthBin(lower=lower, upper=upper, count=count, **{m: errors[m] for m in BIN_METRICS})
        )
    result.excluded = int((~covered).sum())
    if result.excluded:
        logger.debug(f"{result.excluded} valid pixels fall outside bins {edges}")
    return result
