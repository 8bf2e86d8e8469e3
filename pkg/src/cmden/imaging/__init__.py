"""Image grids, bilinear sampling, resizing and windowed statistics."""

from cmden.imaging.filters import (
    LocalStatistics,
    box_filter,
    box_filter_adjoint,
    forward_differences,
    forward_differences_adjoint,
    local_mean_var,
    spatial_gradients,
)
from cmden.imaging.grid import ImageGrid, SampledView
from cmden.imaging.resize import (
    pyramid_shapes,
    upsample_adjoint,
    upsample_array,
    upsample_bilinear,
)
from cmden.imaging.sampling import (
    bilinear_sample,
    bilinear_sample_adjoint,
    synthesize_from_warp,
    synthesize_view,
    synthesize_view_adjoint,
)

__all__ = [
    "ImageGrid",
    "LocalStatistics",
    "SampledView",
    "bilinear_sample",
    "bilinear_sample_adjoint",
    "box_filter",
    "box_filter_adjoint",
    "forward_differences",
    "forward_differences_adjoint",
    "local_mean_var",
    "pyramid_shapes",
    "spatial_gradients",
    "synthesize_from_warp",
    "synthesize_view",
    "synthesize_view_adjoint",
    "upsample_adjoint",
    "upsample_array",
    "upsample_bilinear",
]
