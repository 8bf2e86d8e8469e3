"""File formats and dataset layout."""

from cmden.dataio.dataset import (
    ExportedFrame,
    ExportManifest,
    FrameTriplet,
    SplitEntry,
    export_frames,
    kitti_intrinsics,
    read_depth_map,
    read_frame,
    read_mask_pfm,
    read_split_file,
    write_mask_pfm,
)
from cmden.dataio.images import (
    DEPTH_PNG_SCALE,
    PREVIEW_COLORMAP,
    depth_preview,
    read_depth_png,
    read_image,
    write_depth_png,
    write_depth_preview,
    write_image,
)
from cmden.dataio.pfm import read_pfm, write_pfm

__all__ = [
    "DEPTH_PNG_SCALE",
    "PREVIEW_COLORMAP",
    "ExportManifest",
    "ExportedFrame",
    "FrameTriplet",
    "SplitEntry",
    "depth_preview",
    "export_frames",
    "kitti_intrinsics",
    "read_depth_png",
    "read_depth_map",
    "read_frame",
    "read_image",
    "read_mask_pfm",
    "read_pfm",
    "read_split_file",
    "write_depth_png",
    "write_depth_preview",
    "write_image",
    "write_mask_pfm",
    "write_pfm",
]
