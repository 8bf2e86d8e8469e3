"""Differentiable bilinear sampling and view synthesis."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from cmden.errors import InvalidInputError
from cmden.geometry.camera import CameraIntrinsics
from cmden.geometry.pose import PoseSE3
from cmden.geometry.warp import WarpResult, warp_adjoint, warp_coordinates
from cmden.imaging.grid import ImageGrid, SampledView


@dataclass
class SamplerCells:
    """Lattice cell and fractional offsets of every sample location."""

    x0: np.ndarray
    y0: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    valid: np.ndarray


def sampler_cells(
    xs: np.ndarray,
    ys: np.ndarray,
    height: int,
    width: int,
    valid: Optional[np.ndarray] = None,
) -> SamplerCells:
    """Locate sample coordinates on a ``height x width`` lattice.

    Locations outside ``[0, W-1] x [0, H-1]`` are invalid. The left cell
    index is clipped to ``W-2`` so the right border is reached with weight 1.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise InvalidInputError(f"coordinate shapes differ: {xs.shape} vs {ys.shape}")
    inside = np.isfinite(xs) & np.isfinite(ys)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != xs.shape:
            raise InvalidInputError(
                f"validity shape {valid.shape} does not match coordinates {xs.shape}"
            )
        inside &= valid
    inside &= (xs >= 0) & (xs <= width - 1) & (ys >= 0) & (ys <= height - 1)

    xs_safe = np.where(inside, xs, 0.0)
    ys_safe = np.where(inside, ys, 0.0)
    x0 = np.clip(np.floor(xs_safe), 0, max(width - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(ys_safe), 0, max(height - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    wx = np.where(x1 > x0, xs_safe - x0, 0.0)
    wy = np.where(y1 > y0, ys_safe - y0, 0.0)
    return SamplerCells(x0=x0, y0=y0, x1=x1, y1=y1, wx=wx, wy=wy, valid=inside)


def _corners(data: np.ndarray, cells: SamplerCells) -> tuple[np.ndarray, ...]:
    return (
        data[cells.y0, cells.x0],
        data[cells.y0, cells.x1],
        data[cells.y1, cells.x0],
        data[cells.y1, cells.x1],
    )


def bilinear_sample(
    source: ImageGrid,
    xs: np.ndarray,
    ys: np.ndarray,
    valid: Optional[np.ndarray] = None,
) -> SampledView:
    """Bilinearly interpolate ``source`` at per-pixel coordinates.

    Args:
        source: Image to read from.
        xs: Column coordinates, one per output pixel.
        ys: Row coordinates, same shape as ``xs``.
        valid: Optional mask of coordinates known to be usable.

    Returns:
        A :class:`SampledView` whose invalid pixels are 0.

    Raises:
        InvalidInputError: If coordinate or mask shapes disagree.
    """
    cells = sampler_cells(xs, ys, source.height, source.width, valid)
    i00, i01, i10, i11 = _corners(source.data, cells)
    wx = cells.wx[..., None]
    wy = cells.wy[..., None]
    values = (1.0 - wy) * ((1.0 - wx) * i00 + wx * i01) + wy * ((1.0 - wx) * i10 + wx * i11)
    values = np.where(cells.valid[..., None], values, 0.0)
    return SampledView(
        image=ImageGrid(values),
        validity=cells.valid,
        xs=np.asarray(xs, dtype=np.float64),
        ys=np.asarray(ys, dtype=np.float64),
    )


def bilinear_sample_adjoint(
    source: ImageGrid,
    view: SampledView,
    grad_output: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar with respect to the sample coordinates.

    Args:
        source: The image that was sampled.
        view: Result of :func:`bilinear_sample` (carries the coordinates).
        grad_output: Gradient with respect to ``view.image``, shape ``(H, W, C)``.

    Returns:
        ``(grad_xs, grad_ys)``, zero at invalid pixels.
    """
    if view.xs is None or view.ys is None:
        raise InvalidInputError("sampled view does not carry its coordinates")
    cells = sampler_cells(view.xs, view.ys, source.height, source.width, view.validity)
    i00, i01, i10, i11 = _corners(source.data, cells)
    wx = cells.wx[..., None]
    wy = cells.wy[..., None]
    d_dx = (1.0 - wy) * (i01 - i00) + wy * (i11 - i10)
    d_dy = (1.0 - wx) * (i10 - i00) + wx * (i11 - i01)
    grad_output = np.asarray(grad_output, dtype=np.float64).reshape(d_dx.shape)
    grad_xs = np.where(cells.valid, np.sum(grad_output * d_dx, axis=-1), 0.0)
    grad_ys = np.where(cells.valid, np.sum(grad_output * d_dy, axis=-1), 0.0)
    return grad_xs, grad_ys


def synthesize_from_warp(source: ImageGrid, warp: WarpResult) -> SampledView:
    """Sample ``source`` at precomputed warp coordinates."""
    if source.shape != warp.xs.shape:
        raise InvalidInputError(
            f"source shape {source.shape} does not match target grid {warp.xs.shape}"
        )
    return bilinear_sample(source, warp.xs, warp.ys, valid=warp.valid)


def synthesize_view(
    source: ImageGrid,
    depth_t: np.ndarray,
    pose: PoseSE3,
    intrinsics: CameraIntrinsics,
) -> SampledView:
    """Reconstruct the target view from a source image.

    Validity is the conjunction of the front-of-camera test and the
    in-bounds test of the sampler.
    """
    depth_t = np.asarray(depth_t, dtype=np.float64)
    if depth_t.shape != source.shape:
        raise InvalidInputError(
            f"depth shape {depth_t.shape} does not match source {source.shape}"
        )
    return synthesize_from_warp(source, warp_coordinates(depth_t, pose, intrinsics))


def synthesize_view_adjoint(
    source: ImageGrid,
    warp: WarpResult,
    view: SampledView,
    grad_image: np.ndarray,
    params: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Chain the sampler and warp adjoints to depth and pose parameters."""
    grad_xs, grad_ys = bilinear_sample_adjoint(source, view, grad_image)
    return warp_adjoint(warp, grad_xs, grad_ys, params)
