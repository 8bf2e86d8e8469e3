"""View-synthesis losses: SSIM, photometric error, auto-mask, smoothness and the multi-scale objective."""

from cmden.photometric.losses import (
    DEFAULT_ALPHA,
    REDUCTIONS,
    ReprojectionLoss,
    auto_mask,
    pe_map,
    reduce_errors,
    reprojection_loss,
    smoothness_loss,
)
from cmden.photometric.objective import (
    LossBreakdown,
    LossSettings,
    ObjectiveInputs,
    forward_objective,
    multiscale_total_loss,
)
from cmden.photometric.ssim import ssim_map

__all__ = [
    "DEFAULT_ALPHA",
    "LossBreakdown",
    "LossSettings",
    "ObjectiveInputs",
    "REDUCTIONS",
    "ReprojectionLoss",
    "auto_mask",
    "forward_objective",
    "multiscale_total_loss",
    "pe_map",
    "reduce_errors",
    "reprojection_loss",
    "smoothness_loss",
    "ssim_map",
]
