"""Pinhole camera, SE(3) poses, depth parameterization and reprojection."""

from cmden.geometry.camera import (
    CameraIntrinsics,
    backproject,
    pixel_grid,
    pixel_rays,
    project,
)
from cmden.geometry.depth import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MIN_DEPTH,
    DepthField,
    depth_coefficients,
    depth_to_sigma,
    sigma_to_depth,
    sigma_to_depth_derivative,
    sigma_to_inverse_depth,
)
from cmden.geometry.pose import (
    PoseSE3,
    compose,
    exp6,
    invert,
    log6,
    power,
    relative_pose,
    rotation_jacobian,
    so3_exp,
    so3_log,
)
from cmden.geometry.warp import (
    Z_EPS,
    WarpResult,
    warp_adjoint,
    warp_adjoint_inverse_depth,
    warp_coordinates,
    warp_inverse_depth,
)

__all__ = [
    "CameraIntrinsics",
    "DEFAULT_MAX_DEPTH",
    "DEFAULT_MIN_DEPTH",
    "DepthField",
    "PoseSE3",
    "WarpResult",
    "Z_EPS",
    "backproject",
    "compose",
    "depth_coefficients",
    "depth_to_sigma",
    "exp6",
    "invert",
    "log6",
    "pixel_grid",
    "pixel_rays",
    "power",
    "project",
    "relative_pose",
    "rotation_jacobian",
    "sigma_to_depth",
    "sigma_to_depth_derivative",
    "sigma_to_inverse_depth",
    "so3_exp",
    "so3_log",
    "warp_adjoint",
    "warp_adjoint_inverse_depth",
    "warp_coordinates",
    "warp_inverse_depth",
]
