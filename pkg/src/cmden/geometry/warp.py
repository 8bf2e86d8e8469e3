"""Reprojection of target pixels into a source view.

For a target pixel with ray ``r = K^-1 p`` and inverse depth ``d``, the
source point is ``X' = (R r + t d) / d``. Perspective division only needs
the bracketed vector ``Y = R r + t d``, and its sign agrees with the depth
of ``X'`` because ``d > 0``. Coordinates are written as
``x + fx * (Y0 / Y2 - r0)`` so that the identity pose reproduces the pixel
grid bit for bit.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from cmden.errors import InvalidInputError
from cmden.geometry.camera import CameraIntrinsics, pixel_grid, pixel_rays
from cmden.geometry.pose import PoseSE3, rotation_jacobian

# Transformed points with camera z at or below this are behind the camera.
Z_EPS = 1e-6
INVALID_COORDINATE = -1.0


@dataclass
class WarpResult:
    """Source-view coordinates for every target pixel.

    Invalid pixels carry ``INVALID_COORDINATE`` in both coordinates.
    """

    xs: np.ndarray
    ys: np.ndarray
    valid: np.ndarray
    inverse_depth: np.ndarray
    rays: np.ndarray
    transformed: np.ndarray
    pose: PoseSE3
    intrinsics: CameraIntrinsics


def _check_pose(pose: PoseSE3) -> None:
    if not (np.all(np.isfinite(pose.rotation)) and np.all(np.isfinite(pose.translation))):
        raise InvalidInputError("pose contains non-finite values")


def warp_inverse_depth(
    inverse_depth: np.ndarray, pose: PoseSE3, intrinsics: CameraIntrinsics
) -> WarpResult:
    """Reproject target pixels given per-pixel inverse depth."""
    inverse_depth = np.asarray(inverse_depth, dtype=np.float64)
    if inverse_depth.shape != intrinsics.shape:
        raise InvalidInputError(
            f"depth grid shape {inverse_depth.shape} does not match camera {intrinsics.shape}"
        )
    if not np.all(np.isfinite(inverse_depth)) or np.any(inverse_depth <= 0):
        raise InvalidInputError("depth must be finite and positive")
    _check_pose(pose)

    rays = pixel_rays(intrinsics)
    transformed = np.einsum("ij,hwj->hwi", pose.rotation, rays)
    transformed = transformed + inverse_depth[..., None] * pose.translation

    z = transformed[..., 2]
    valid = z > Z_EPS * inverse_depth
    safe_z = np.where(valid, z, 1.0)
    px, py = pixel_grid(intrinsics.height, intrinsics.width)
    xs = px + intrinsics.fx * (transformed[..., 0] / safe_z - rays[..., 0])
    ys = py + intrinsics.fy * (transformed[..., 1] / safe_z - rays[..., 1])
    valid &= np.isfinite(xs) & np.isfinite(ys)
    xs = np.where(valid, xs, INVALID_COORDINATE)
    ys = np.where(valid, ys, INVALID_COORDINATE)
    return WarpResult(
        xs=xs,
        ys=ys,
        valid=valid,
        inverse_depth=inverse_depth,
        rays=rays,
        transformed=transformed,
        pose=pose,
        intrinsics=intrinsics,
    )


def warp_coordinates(
    depth: np.ndarray, pose: PoseSE3, intrinsics: CameraIntrinsics
) -> WarpResult:
    """Source-view pixel coordinates of every target pixel.

    Args:
        depth: Positive ``(H, W)`` depth grid of the target view.
        pose: Transform from the target camera to the source camera.
        intrinsics: Shared pinhole intrinsics.

    Returns:
        A :class:`WarpResult`; pixels whose transformed depth is at or
        below ``Z_EPS`` are marked invalid.

    Raises:
        InvalidInputError: If depth is non-positive, non-finite or mis-shaped.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise InvalidInputError("depth must be finite and positive")
    return warp_inverse_depth(1.0 / depth, pose, intrinsics)


def warp_adjoint_inverse_depth(
    warp: WarpResult,
    grad_xs: np.ndarray,
    grad_ys: np.ndarray,
    params: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pull coordinate gradients back to inverse depth and pose parameters.

    Args:
        warp: Forward result.
        grad_xs: Gradient of a scalar with respect to ``warp.xs``.
        grad_ys: Gradient of a scalar with respect to ``warp.ys``.
        params: Pose parameters the rotation was built from; defaults to
            the logarithm of ``warp.pose``.

    Returns:
        ``(grad_inverse_depth, grad_params)`` with shapes ``(H, W)`` and ``(6,)``.
    """
    k = warp.intrinsics
    y = warp.transformed
    z = np.where(warp.valid, y[..., 2], 1.0)
    gx = np.where(warp.valid, grad_xs, 0.0)
    gy = np.where(warp.valid, grad_ys, 0.0)

    grad_y = np.empty_like(y)
    grad_y[..., 0] = gx * k.fx / z
    grad_y[..., 1] = gy * k.fy / z
    grad_y[..., 2] = -(gx * k.fx * y[..., 0] + gy * k.fy * y[..., 1]) / z**2

    translation = warp.pose.translation
    grad_inverse_depth = grad_y @ translation
    weighted = grad_y * warp.inverse_depth[..., None]
    grad_translation = weighted.reshape(-1, 3).sum(axis=0)

    omega = warp.pose.params[:3] if params is None else np.asarray(params)[:3]
    jac = rotation_jacobian(omega)
    # d Y / d omega_i = (dR/d omega_i) r
    outer = np.einsum("hwi,hwj->ij", grad_y, warp.rays)
    grad_omega = np.einsum("kij,ij->k", jac, outer)
    return grad_inverse_depth, np.concatenate([grad_omega, grad_translation])


def warp_adjoint(
    warp: WarpResult,
    grad_xs: np.ndarray,
    grad_ys: np.ndarray,
    params: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`warp_adjoint_inverse_depth` but with respect to depth."""
    grad_inverse, grad_params = warp_adjoint_inverse_depth(warp, grad_xs, grad_ys, params)
    return -grad_inverse * warp.inverse_depth**2, grad_params
