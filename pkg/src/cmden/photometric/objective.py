"""Multi-scale view-synthesis objective.

Each scale's sigma grid is upsampled to full resolution, converted to
inverse depth and used to synthesize every source at full resolution.
The auto-mask is computed once from the finest scale and shared by all
scales; it is treated as a constant when differentiating.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from cmden.errors import InvalidInputError, NonFiniteError
from cmden.geometry.camera import CameraIntrinsics
from cmden.geometry.depth import DEFAULT_MAX_DEPTH, DEFAULT_MIN_DEPTH, depth_coefficients
from cmden.geometry.pose import PoseSE3
from cmden.geometry.warp import WarpResult, warp_inverse_depth
from cmden.imaging.grid import ImageGrid, SampledView, check_same_shape
from cmden.imaging.resize import upsample_array
from cmden.imaging.sampling import synthesize_from_warp
from cmden.photometric.losses import (
    DEFAULT_ALPHA,
    PhotometricForward,
    Reduction,
    ReductionResult,
    SmoothnessForward,
    auto_mask_from_errors,
    pe_forward,
    reduce_errors,
    smoothness_forward,
)

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHNESS_WEIGHT = 1e-3


class LossSettings(BaseModel):
    """Weights and switches of the training objective."""

    alpha: float = Field(default=DEFAULT_ALPHA, ge=0.0, le=1.0, description="SSIM weight in pe")
    smoothness_weight: float = Field(
        default=DEFAULT_SMOOTHNESS_WEIGHT, ge=0.0, description="Smoothness weight lambda"
    )
    use_auto_mask: bool = Field(default=True, description="Gate photometric term by auto-mask")
    reduction: Reduction = Field(default="min", description="Per-pixel reduction over sources")
    ssim_window: int = Field(default=3, ge=1, description="SSIM box window size (odd)")


@dataclass
class ObjectiveInputs:
    """Everything the objective needs besides the optimized state."""

    target: ImageGrid
    sources: list[ImageGrid]
    intrinsics: CameraIntrinsics
    min_depth: float = DEFAULT_MIN_DEPTH
    max_depth: float = DEFAULT_MAX_DEPTH
    photometric_gate: Optional[np.ndarray] = None
    smoothness_gate: Optional[np.ndarray] = None
    settings: LossSettings = field(default_factory=LossSettings)

    def __post_init__(self) -> None:
        if not self.sources:
            raise InvalidInputError("objective needs at least one source image")
        for source in self.sources:
            check_same_shape(self.target, source)
        if self.target.shape != self.intrinsics.shape:
            raise InvalidInputError(
                f"target shape {self.target.shape} does not match camera {self.intrinsics.shape}"
            )
        for name in ("photometric_gate", "smoothness_gate"):
            gate = getattr(self, name)
            if gate is not None:
                gate = np.asarray(gate, dtype=bool)
                if gate.shape != self.target.shape:
                    raise InvalidInputError(
                        f"{name} shape {gate.shape} does not match target {self.target.shape}"
                    )
                setattr(self, name, gate)
        depth_coefficients(self.min_depth, self.max_depth)

    @property
    def shape(self) -> tuple[int, int]:
        return self.target.shape

    def with_gates(
        self,
        photometric_gate: Optional[np.ndarray],
        smoothness_gate: Optional[np.ndarray],
    ) -> "ObjectiveInputs":
        return ObjectiveInputs(
            target=self.target,
            sources=self.sources,
            intrinsics=self.intrinsics,
            min_depth=self.min_depth,
            max_depth=self.max_depth,
            photometric_gate=photometric_gate,
            smoothness_gate=smoothness_gate,
            settings=self.settings,
        )


@dataclass
class ScaleLoss:
    photometric: float
    smoothness: float
    total: float
    valid_count: int


@dataclass
class LossBreakdown:
    """Scalar terms of the objective plus the finest-scale maps.

    ``total == photometric + smoothness_weight * smoothness`` where both
    terms are means over scales.
    """

    photometric: float
    smoothness: float
    total: float
    per_pixel_photometric: ImageGrid
    auto_mask: np.ndarray
    valid_mask: np.ndarray
    valid_fraction: float
    degenerate: bool = False
    per_scale: list[ScaleLoss] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "photometric": self.photometric,
            "smoothness": self.smoothness,
            "total": self.total,
            "valid_fraction": self.valid_fraction,
            "degenerate": self.degenerate,
        }


@dataclass
class ScaleForward:
    """Intermediates of one scale, retained for the reverse pass."""

    sigma_shape: tuple[int, int]
    sigma_full: np.ndarray
    inverse_depth: np.ndarray
    warps: list[WarpResult]
    views: list[SampledView]
    photometric: list[PhotometricForward]
    reduction: ReductionResult
    effective: np.ndarray
    effective_count: int
    smoothness: SmoothnessForward
    loss: ScaleLoss


@dataclass
class ObjectiveForward:
    breakdown: LossBreakdown
    scales: list[ScaleForward]
    poses: list[PoseSE3]

    def regime_key(self) -> bytes:
        """Digest of every discrete branch taken by the forward pass.

        Two evaluations with equal keys lie in the same smooth piece of the
        objective: same sampler cells and validity, same L1 signs, same
        per-pixel argmin, same SSIM clipping, same auto-mask and same
        smoothness signs.
        """
        digest = hashlib.blake2b(digest_size=16)
        digest.update(np.packbits(self.breakdown.auto_mask).tobytes())
        for scale in self.scales:
            for warp, pe in zip(scale.warps, scale.photometric):
                digest.update(np.packbits(warp.valid).tobytes())
                digest.update(np.floor(warp.xs).astype(np.int32).tobytes())
                digest.update(np.floor(warp.ys).astype(np.int32).tobytes())
                digest.update(np.sign(pe.diff).astype(np.int8).tobytes())
                digest.update(np.packbits(pe.ssim.clipped).tobytes())
            digest.update(scale.reduction.selection.astype(np.int32).tobytes())
            digest.update(np.sign(scale.smoothness.dx).astype(np.int8).tobytes())
            digest.update(np.sign(scale.smoothness.dy).astype(np.int8).tobytes())
        return digest.digest()


def _check_finite(stage: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(stage)


def forward_objective(
    sigmas: Sequence[np.ndarray],
    poses: Sequence[PoseSE3],
    inputs: ObjectiveInputs,
) -> ObjectiveForward:
    """Evaluate the objective and keep everything the adjoint needs.

    Args:
        sigmas: One sigma grid per scale, ordered coarse to fine; the last
            must be full resolution.
        poses: Target-to-source transform for each source image.
        inputs: Images, camera, gates and loss settings.

    Raises:
        InvalidInputError: On malformed state.
        NonFiniteError: Naming the first stage producing NaN or inf.
    """
    if not sigmas:
        raise InvalidInputError("at least one sigma scale is required")
    if len(poses) != len(inputs.sources):
        raise InvalidInputError(
            f"{len(inputs.sources)} sources but {len(poses)} poses"
        )
    height, width = inputs.shape
    if np.asarray(sigmas[-1]).shape != (height, width):
        raise InvalidInputError(
            f"finest sigma scale {np.asarray(sigmas[-1]).shape} must match image {inputs.shape}"
        )
    settings = inputs.settings
    a, b = depth_coefficients(inputs.min_depth, inputs.max_depth)
    target = inputs.target.data
    n_scales = len(sigmas)

    gate = inputs.photometric_gate
    auto: Optional[np.ndarray] = None
    identity_errors: list[np.ndarray] = []
    if settings.use_auto_mask:
        identity_errors = [
            pe_forward(target, s.data, settings.alpha, settings.ssim_window).value
            for s in inputs.sources
        ]

    # Finest scale first so its auto-mask is available to the others.
    order = list(range(n_scales - 1, -1, -1))
    scale_results: dict[int, ScaleForward] = {}
    for index in order:
        sigma = np.asarray(sigmas[index], dtype=np.float64)
        _check_finite("sigma", sigma)
        if sigma.min() < 0.0 or sigma.max() > 1.0:
            raise InvalidInputError(
                f"sigma at scale {index} outside [0, 1]: [{sigma.min()}, {sigma.max()}]"
            )
        sigma_full = upsample_array(sigma, height, width)
        _check_finite("upsample", sigma_full)
        inverse_depth = a * sigma_full + b
        _check_finite("sigma_to_depth", inverse_depth)

        warps, views, pes = [], [], []
        for source, pose in zip(inputs.sources, poses):
            warp = warp_inverse_depth(inverse_depth, pose, inputs.intrinsics)
            _check_finite("warp_coordinates", warp.xs, warp.ys)
            view = synthesize_from_warp(source, warp)
            _check_finite("bilinear_sample", view.image.data)
            pe = pe_forward(target, view.image.data, settings.alpha, settings.ssim_window)
            _check_finite("pe_map", pe.value)
            warps.append(warp)
            views.append(view)
            pes.append(pe)

        if settings.use_auto_mask and auto is None:
            auto = auto_mask_from_errors(
                [p.value for p in pes], [v.validity for v in views], identity_errors
            )

        reduced = reduce_errors(
            [p.value for p in pes], [v.validity for v in views], settings.reduction
        )
        effective = reduced.valid.copy()
        if auto is not None:
            effective &= auto
        if gate is not None:
            effective &= gate
        count = int(effective.sum())
        photometric = float(reduced.per_pixel[effective].sum() / count) if count else 0.0

        smooth = smoothness_forward(inverse_depth, target, inputs.smoothness_gate)
        _check_finite("smoothness", np.asarray(smooth.value))
        total = photometric + settings.smoothness_weight * smooth.value
        scale_results[index] = ScaleForward(
            sigma_shape=sigma.shape,  # type: ignore[arg-type]
            sigma_full=sigma_full,
            inverse_depth=inverse_depth,
            warps=warps,
            views=views,
            photometric=pes,
            reduction=reduced,
            effective=effective,
            effective_count=count,
            smoothness=smooth,
            loss=ScaleLoss(
                photometric=photometric,
                smoothness=smooth.value,
                total=total,
                valid_count=count,
            ),
        )

    scales = [scale_results[i] for i in range(n_scales)]
    photometric = float(np.mean([s.loss.photometric for s in scales]))
    smoothness = float(np.mean([s.loss.smoothness for s in scales]))
    total = photometric + settings.smoothness_weight * smoothness
    _check_finite("total", np.asarray(total))

    finest = scales[-1]
    auto_mask = auto if auto is not None else np.ones((height, width), dtype=bool)
    degenerate = finest.effective_count == 0
    if degenerate:
        logger.debug("Every pixel is masked out; photometric term is 0")
    breakdown = LossBreakdown(
        photometric=photometric,
        smoothness=smoothness,
        total=total,
        per_pixel_photometric=ImageGrid(finest.reduction.per_pixel),
        auto_mask=auto_mask,
        valid_mask=finest.reduction.valid,
        valid_fraction=float(finest.effective_count) / (height * width),
        degenerate=degenerate,
        per_scale=[s.loss for s in scales],
    )
    return ObjectiveForward(breakdown=breakdown, scales=scales, poses=list(poses))


def multiscale_total_loss(
    target_full: ImageGrid,
    sources_full: Sequence[ImageGrid],
    depth_sigma_per_scale: Sequence[np.ndarray],
    pose: Union[PoseSE3, Sequence[PoseSE3]],
    intrinsics: CameraIntrinsics,
    smoothness_weight: float = DEFAULT_SMOOTHNESS_WEIGHT,
    alpha: float = DEFAULT_ALPHA,
    use_auto_mask: bool = True,
    reduction: Reduction = "min",
    min_depth: float = DEFAULT_MIN_DEPTH,
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> LossBreakdown:
    """Total loss over all scales for the given sigma grids and poses.

    Args:
        target_full: Full-resolution target image.
        sources_full: Full-resolution source images.
        depth_sigma_per_scale: Sigma grids ordered coarse to fine.
        pose: One target-to-source pose per source (a single pose is
            accepted when there is one source).
        intrinsics: Full-resolution camera.
        smoothness_weight: Lambda.
        alpha: SSIM weight.
        use_auto_mask: Gate the photometric term with the auto-mask.
        reduction: Per-pixel reduction over sources.
        min_depth: Depth at sigma 1.
        max_depth: Depth at sigma 0.
    """
    poses = [pose] if isinstance(pose, PoseSE3) else list(pose)
    inputs = ObjectiveInputs(
        target=target_full,
        sources=list(sources_full),
        intrinsics=intrinsics,
        min_depth=min_depth,
        max_depth=max_depth,
        settings=LossSettings(
            alpha=alpha,
            smoothness_weight=smoothness_weight,
            use_auto_mask=use_auto_mask,
            reduction=reduction,
        ),
    )
    return forward_objective(depth_sigma_per_scale, poses, inputs).breakdown
