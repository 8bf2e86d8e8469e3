"""Sight-distance masks and mask-weighted fusion of per-layer depth maps."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from cmden.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass
class SightMask:
    """Pixels whose rough depth falls in ``[alpha, beta)``."""

    mask: np.ndarray
    alpha: float
    beta: float

    @property
    def coverage(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "coverage": self.coverage,
            "pixels": int(self.mask.sum()),
        }


def check_intervals(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Validate that intervals are non-negative, non-empty, ordered and disjoint."""
    checked = [(float(a), float(b)) for a, b in intervals]
    if not checked:
        raise InvalidInputError("at least one depth interval is required")
    for a, b in checked:
        if not (np.isfinite(a) and np.isfinite(b)):
            raise InvalidInputError(f"interval [{a}, {b}) is not finite")
        if a < 0:
            raise InvalidInputError(f"interval [{a}, {b}) starts below 0")
        if a >= b:
            raise InvalidInputError(f"interval [{a}, {b}) is inverted or empty")
    for (a0, b0), (a1, b1) in zip(checked, checked[1:]):
        if a1 < b0:
            raise InvalidInputError(
                f"intervals [{a0}, {b0}) and [{a1}, {b1}) overlap or are unordered"
            )
    return checked


def generate_sight_masks(
    rough_depth: np.ndarray, intervals: Sequence[tuple[float, float]]
) -> list[SightMask]:
    """One mask per interval, ``alpha <= rough_depth < beta``.

    Args:
        rough_depth: ``(H, W)`` depth map from the first stage.
        intervals: Ordered, disjoint half-open intervals in the same units.

    Returns:
        Masks in interval order; each pixel below the top bound lands in at
        most one of them (exactly one when the intervals tile ``[0, top)``).

    Raises:
        InvalidInputError: On overlapping, inverted or negative intervals,
            or a non-finite depth map.
    """
    depth = np.asarray(rough_depth, dtype=np.float64)
    if depth.ndim != 2:
        raise InvalidInputError(f"rough depth must be 2-D, got shape {depth.shape}")
    if not np.all(np.isfinite(depth)):
        raise InvalidInputError("rough depth contains non-finite values")
    masks = [
        SightMask(mask=(depth >= a) & (depth < b), alpha=a, beta=b)
        for a, b in check_intervals(intervals)
    ]
    beyond = int((depth >= masks[-1].beta).sum())
    if beyond:
        logger.debug(f"{beyond} pixels at or beyond the top bound {masks[-1].beta}")
    return masks


def resolve_intervals(
    intervals: Sequence[tuple[float, float]], rough_depth: np.ndarray
) -> list[tuple[float, float]]:
    """Turn fractions of ``max(rough_depth)`` into depth intervals.

    A top fraction of 1.0 is widened just past the maximum so the farthest
    pixel is still covered.
    """
    checked = check_intervals(intervals)
    if checked[-1][1] > 1.0:
        raise InvalidInputError(f"relative bounds must lie in [0, 1], got {checked[-1][1]}")
    top = float(np.max(rough_depth))
    resolved = [(a * top, b * top) for a, b in checked]
    if checked[-1][1] == 1.0:
        resolved[-1] = (resolved[-1][0], float(np.nextafter(top, np.inf)))
    return resolved


def dilate_mask(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Grow a mask by ``iterations`` pixels in all eight directions."""
    mask = np.asarray(mask, dtype=bool)
    if iterations < 1 or not mask.any():
        return mask.copy()
    structure = np.ones((3, 3), dtype=bool)
    return ndimage.binary_dilation(mask, structure=structure, iterations=iterations)


def fuse_depth(masks: Sequence[SightMask], layer_depths: Sequence[np.ndarray]) -> np.ndarray:
    """Mask-weighted sum of per-layer depths.

    Pixels covered by no mask take the deepest layer's value.

    Raises:
        InvalidInputError: If the lists are misaligned, shapes differ or
            two masks overlap.
    """
    if not masks:
        raise InvalidInputError("fusion needs at least one layer")
    if len(masks) != len(layer_depths):
        raise InvalidInputError(f"{len(masks)} masks but {len(layer_depths)} layer depths")
    shape = masks[0].mask.shape
    depths = [np.asarray(d, dtype=np.float64) for d in layer_depths]
    for k, (m, d) in enumerate(zip(masks, depths)):
        if m.mask.shape != shape or d.shape != shape:
            raise InvalidInputError(
                f"layer {k}: mask {m.mask.shape} and depth {d.shape} must both be {shape}"
            )

    counts = np.sum([m.mask.astype(np.int64) for m in masks], axis=0)
    if np.any(counts > 1):
        raise InvalidInputError(f"masks overlap at {int((counts > 1).sum())} pixels")

    fused = depths[-1].copy()
    for m, d in zip(masks, depths):
        fused = np.where(m.mask, d, fused)
    uncovered = int((counts == 0).sum())
    if uncovered:
        logger.debug(f"{uncovered} pixels outside every mask backfilled from the deepest layer")
    return fused
