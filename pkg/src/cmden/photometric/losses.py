"""Photometric error, reprojection reductions, auto-masking and smoothness."""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from cmden.errors import InvalidInputError
from cmden.imaging.filters import (
    DEFAULT_WINDOW,
    forward_differences,
    forward_differences_adjoint,
)
from cmden.imaging.grid import ImageGrid, SampledView, check_same_shape
from cmden.photometric.ssim import SSIMForward, ssim_adjoint, ssim_forward

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.85
Reduction = Literal["min", "sum", "mean"]
REDUCTIONS = ("min", "sum", "mean")


@dataclass
class PhotometricForward:
    """Intermediates of :func:`pe_forward`."""

    ssim: SSIMForward
    diff: np.ndarray
    alpha: float
    value: np.ndarray


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")


def pe_forward(
    a: np.ndarray, b: np.ndarray, alpha: float = DEFAULT_ALPHA, window: int = DEFAULT_WINDOW
) -> PhotometricForward:
    """Channel-averaged ``(alpha/2)(1 - SSIM) + (1 - alpha)|a - b|`` on arrays."""
    _check_alpha(alpha)
    ssim = ssim_forward(a, b, window)
    diff = b - a
    per_channel = 0.5 * alpha * (1.0 - ssim.value) + (1.0 - alpha) * np.abs(diff)
    return PhotometricForward(ssim=ssim, diff=diff, alpha=alpha, value=per_channel.mean(axis=-1))


def pe_adjoint(forward: PhotometricForward, grad: np.ndarray) -> np.ndarray:
    """Gradient with respect to ``b`` from a per-pixel gradient on pe."""
    channels = forward.diff.shape[-1]
    per_channel = np.repeat(grad[..., None] / channels, channels, axis=-1)
    grad_b = ssim_adjoint(forward.ssim, -0.5 * forward.alpha * per_channel)
    return grad_b + (1.0 - forward.alpha) * per_channel * np.sign(forward.diff)


def pe_map(
    a: ImageGrid, b: ImageGrid, alpha: float = DEFAULT_ALPHA, window: int = DEFAULT_WINDOW
) -> ImageGrid:
    """Per-pixel photometric error between two images.

    Args:
        a: First image, typically the target.
        b: Second image, typically a synthesized view.
        alpha: Weight of the SSIM term; 0 gives plain L1.
        window: SSIM window size.

    Returns:
        Single-channel error map, nonnegative.

    Raises:
        InvalidInputError: On shape mismatch or alpha outside ``[0, 1]``.
    """
    check_same_shape(a, b)
    return ImageGrid(pe_forward(a.data, b.data, alpha, window).value)


@dataclass
class ReductionResult:
    """Per-pixel combination of several photometric error maps.

    ``weights[k]`` is the derivative of ``per_pixel`` with respect to view
    ``k``'s error at the current point (one-hot for ``min``).
    """

    per_pixel: np.ndarray
    valid: np.ndarray
    selection: np.ndarray
    weights: list[np.ndarray]


def reduce_errors(
    errors: Sequence[np.ndarray], validity: Sequence[np.ndarray], reduction: Reduction = "min"
) -> ReductionResult:
    """Combine per-view error maps pixel by pixel.

    Invalid views are ignored; ``min`` breaks ties toward the lowest index.
    Pixels invalid in every view get value 0 and ``valid == False``.
    """
    if not errors:
        raise InvalidInputError("at least one synthesized view is required")
    if len(errors) != len(validity):
        raise InvalidInputError(
            f"got {len(errors)} error maps but {len(validity)} validity masks"
        )
    if reduction not in REDUCTIONS:
        raise InvalidInputError(f"unknown reduction '{reduction}', expected one of {REDUCTIONS}")

    stacked = np.stack(errors)
    masks = np.stack([np.asarray(v, dtype=bool) for v in validity])
    any_valid = masks.any(axis=0)
    count = masks.sum(axis=0)

    if reduction == "min":
        masked = np.where(masks, stacked, np.inf)
        selection = np.argmin(masked, axis=0)
        per_pixel = np.take_along_axis(masked, selection[None], axis=0)[0]
        per_pixel = np.where(any_valid, per_pixel, 0.0)
        selection = np.where(any_valid, selection, -1)
        weights = [((selection == k) & any_valid).astype(np.float64) for k in range(len(errors))]
    else:
        selection = np.full(any_valid.shape, -1)
        total = np.sum(np.where(masks, stacked, 0.0), axis=0)
        if reduction == "sum":
            per_pixel = total
            weights = [m.astype(np.float64) for m in masks]
        else:
            safe = np.maximum(count, 1)
            per_pixel = total / safe
            weights = [m / safe for m in masks]
    return ReductionResult(
        per_pixel=per_pixel, valid=any_valid, selection=selection, weights=weights
    )


@dataclass
class ReprojectionLoss:
    """Scalar reprojection loss with its per-pixel map."""

    value: float
    per_pixel: ImageGrid
    valid: np.ndarray
    selection: np.ndarray


def reprojection_loss(
    target: ImageGrid,
    synthesized: Sequence[SampledView],
    reduction: Reduction = "min",
    alpha: float = DEFAULT_ALPHA,
    window: int = DEFAULT_WINDOW,
) -> ReprojectionLoss:
    """Photometric error of the target against several synthesized views.

    The scalar is the mean of the reduced per-pixel map over pixels valid
    in at least one view; it is 0 when no pixel is valid.

    Raises:
        InvalidInputError: If ``synthesized`` is empty or shapes differ.
    """
    if not synthesized:
        raise InvalidInputError("at least one synthesized view is required")
    errors = []
    for view in synthesized:
        check_same_shape(target, view.image)
        errors.append(pe_forward(target.data, view.image.data, alpha, window).value)
    reduced = reduce_errors(errors, [v.validity for v in synthesized], reduction)
    count = int(reduced.valid.sum())
    value = float(reduced.per_pixel[reduced.valid].sum() / count) if count else 0.0
    return ReprojectionLoss(
        value=value,
        per_pixel=ImageGrid(reduced.per_pixel),
        valid=reduced.valid,
        selection=reduced.selection,
    )


def auto_mask_from_errors(
    warped_errors: Sequence[np.ndarray],
    warped_validity: Sequence[np.ndarray],
    identity_errors: Sequence[np.ndarray],
) -> np.ndarray:
    """``min`` warped error strictly below ``min`` unwarped error."""
    if not warped_errors or not identity_errors:
        raise InvalidInputError("auto-mask needs at least one source")
    if len(warped_errors) != len(identity_errors):
        raise InvalidInputError(
            f"{len(identity_errors)} sources but {len(warped_errors)} synthesized views"
        )
    warped = np.min(
        np.stack([np.where(v, e, np.inf) for e, v in zip(warped_errors, warped_validity)]),
        axis=0,
    )
    identity = np.min(np.stack(identity_errors), axis=0)
    return warped < identity


def auto_mask(
    target: ImageGrid,
    sources: Sequence[ImageGrid],
    synthesized: Sequence[SampledView],
    alpha: float = DEFAULT_ALPHA,
    window: int = DEFAULT_WINDOW,
) -> np.ndarray:
    """Binary gate that drops pixels the unwarped sources already explain.

    Returns:
        Boolean ``(H, W)`` mask, True where the warped reconstruction beats
        every raw source.

    Raises:
        InvalidInputError: If the lists are empty or misaligned.
    """
    if len(sources) != len(synthesized):
        raise InvalidInputError(
            f"{len(sources)} sources but {len(synthesized)} synthesized views"
        )
    for src in sources:
        check_same_shape(target, src)
    warped = [pe_forward(target.data, v.image.data, alpha, window).value for v in synthesized]
    identity = [pe_forward(target.data, s.data, alpha, window).value for s in sources]
    return auto_mask_from_errors(warped, [v.validity for v in synthesized], identity)


@dataclass
class SmoothnessForward:
    """Intermediates of :func:`smoothness_forward`."""

    value: float
    dx: np.ndarray
    dy: np.ndarray
    weight_x: np.ndarray
    weight_y: np.ndarray
    mean: float
    gate: np.ndarray
    count: int


def smoothness_forward(
    inverse_depth: np.ndarray,
    image: np.ndarray,
    gate: Optional[np.ndarray] = None,
) -> SmoothnessForward:
    """Edge-aware smoothness of mean-normalized inverse depth.

    With a gate, the normalizing mean and the pixel count run over gated
    pixels only, and a difference term counts only when both of its pixels
    are gated. An empty gate yields 0.
    """
    if inverse_depth.shape != image.shape[:2]:
        raise InvalidInputError(
            f"depth shape {inverse_depth.shape} does not match image {image.shape[:2]}"
        )
    gate = np.ones(inverse_depth.shape, dtype=bool) if gate is None else np.asarray(gate, bool)
    count = int(gate.sum())
    img_dx, img_dy = forward_differences(image)
    edge_x = np.exp(-np.abs(img_dx).mean(axis=-1))
    edge_y = np.exp(-np.abs(img_dy).mean(axis=-1))
    gate_f = gate.astype(np.float64)
    pair_x = np.zeros_like(gate_f)
    pair_y = np.zeros_like(gate_f)
    pair_x[:, :-1] = gate_f[:, :-1] * gate_f[:, 1:]
    pair_y[:-1, :] = gate_f[:-1, :] * gate_f[1:, :]

    dx, dy = forward_differences(inverse_depth)
    if count == 0:
        mean = 1.0
        value = 0.0
    else:
        mean = float(inverse_depth[gate].mean())
        total = np.sum(pair_x * edge_x * np.abs(dx)) + np.sum(pair_y * edge_y * np.abs(dy))
        value = float(total / (mean * count))
    return SmoothnessForward(
        value=value,
        dx=dx,
        dy=dy,
        weight_x=pair_x * edge_x,
        weight_y=pair_y * edge_y,
        mean=mean,
        gate=gate,
        count=count,
    )


def smoothness_adjoint(forward: SmoothnessForward, grad: float) -> np.ndarray:
    """Gradient of ``grad * smoothness`` with respect to inverse depth."""
    shape = forward.dx.shape
    if forward.count == 0:
        return np.zeros(shape)
    scale = grad / (forward.mean * forward.count)
    gx = scale * forward.weight_x * np.sign(forward.dx)
    gy = scale * forward.weight_y * np.sign(forward.dy)
    out = forward_differences_adjoint(gx, gy)
    # d/dd of 1/mean over the gated pixels
    out -= forward.gate * (grad * forward.value / forward.mean / forward.count)
    return out


def smoothness_loss(
    depth: np.ndarray, image: ImageGrid, gate: Optional[np.ndarray] = None
) -> float:
    """Edge-aware smoothness of the depth map's mean-normalized inverse.

    Args:
        depth: Positive ``(H, W)`` depth grid.
        image: Guide image of the same spatial size.
        gate: Optional pixel mask restricting the term.

    Returns:
        Mean over pixels of ``|dx d*| exp(-|dx I|) + |dy d*| exp(-|dy I|)``.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise InvalidInputError("depth must be finite and positive")
    return smoothness_forward(1.0 / depth, image.data, gate).value
