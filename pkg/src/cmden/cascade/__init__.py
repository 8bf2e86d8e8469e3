"""Sight-distance cascade: rough depth, masked layers and fusion."""

from cmden.cascade.config import CascadeConfig, LayerSpec, plan_frame_offsets
from cmden.cascade.masks import (
    SightMask,
    dilate_mask,
    fuse_depth,
    generate_sight_masks,
    resolve_intervals,
)
from cmden.cascade.pipeline import CascadeReport, CascadeResult, LayerReport, run_cascade

__all__ = [
    "CascadeConfig",
    "CascadeReport",
    "CascadeResult",
    "LayerReport",
    "LayerSpec",
    "SightMask",
    "dilate_mask",
    "fuse_depth",
    "generate_sight_masks",
    "plan_frame_offsets",
    "resolve_intervals",
    "run_cascade",
]
