"""Three-stage cascade: rough depth, per-layer masked re-optimization, fusion.

Stage 1 fits one sigma field (and optionally the poses) to the nearest
neighbours of the target with the auto-mask on. Its depth splits the image
into sight-distance masks. Stage 2 re-optimizes an independent field per
mask using that layer's wider frame interval, with the photometric term
restricted to the mask and no auto-mask. Stage 3 fuses the layer depths.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from cmden.cascade.config import CascadeConfig
from cmden.cascade.masks import (
    SightMask,
    dilate_mask,
    fuse_depth,
    generate_sight_masks,
    resolve_intervals,
)
from cmden.errors import InvalidInputError
from cmden.geometry.camera import CameraIntrinsics
from cmden.geometry.depth import depth_to_sigma, sigma_to_depth
from cmden.geometry.pose import PoseSE3, exp6, invert, power, relative_pose
from cmden.imaging.grid import ImageGrid, check_same_shape
from cmden.imaging.resize import pyramid_shapes
from cmden.optimization.gradients import OptimizationState
from cmden.optimization.run import OptimizationResult, TraceEntry, optimize
from cmden.photometric.objective import LossSettings, ObjectiveInputs

logger = logging.getLogger(__name__)

MIN_FRAMES = 2


@dataclass
class LayerReport:
    """Outcome of one optimization stage."""

    name: str
    interval: Optional[tuple[float, float]]
    requested_offsets: list[int]
    offsets: list[int]
    coverage: float
    skipped: bool = False
    initial_loss: float = 0.0
    final_loss: float = 0.0
    iterations: int = 0
    trace: list[TraceEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "interval": list(self.interval) if self.interval is not None else None,
            "requested_offsets": self.requested_offsets,
            "offsets": self.offsets,
            "coverage": self.coverage,
            "skipped": self.skipped,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "iterations": self.iterations,
        }


@dataclass
class CascadeReport:
    target_index: int
    frame_count: int
    rough: LayerReport
    layers: list[LayerReport] = field(default_factory=list)
    intervals: list[tuple[float, float]] = field(default_factory=list)
    auto_mask_coverage: float = 1.0
    degenerate: bool = False
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target_index": self.target_index,
            "frame_count": self.frame_count,
            "rough": self.rough.to_dict(),
            "layers": [layer.to_dict() for layer in self.layers],
            "intervals": [list(i) for i in self.intervals],
            "auto_mask_coverage": self.auto_mask_coverage,
            "degenerate": self.degenerate,
            "warnings": list(self.warnings),
        }


@dataclass
class CascadeResult:
    fused_depth: np.ndarray
    layer_depths: list[np.ndarray]
    rough_depth: np.ndarray
    masks: list[SightMask]
    report: CascadeReport
    rough_poses: dict[int, PoseSE3] = field(default_factory=dict)


def resolve_offsets(
    offsets: Sequence[int], target_index: int, frame_count: int, warnings: list[str]
) -> list[int]:
    """Clamp offsets into the sequence; drop those with no frame on their side."""
    resolved: list[int] = []
    for offset in offsets:
        source = target_index + offset
        clamped = min(max(source, 0), frame_count - 1)
        if clamped == target_index:
            message = f"offset {offset:+d} has no frame on its side of target {target_index}; dropped"
            logger.warning(message)
            warnings.append(message)
            continue
        if clamped != source:
            message = (
                f"offset {offset:+d} reaches frame {source} outside [0, {frame_count - 1}]; "
                f"clamped to {clamped - target_index:+d}"
            )
            logger.warning(message)
            warnings.append(message)
        if clamped - target_index not in resolved:
            resolved.append(clamped - target_index)
    return resolved


class _CascadeRun:
    """State shared by the stages of one :func:`run_cascade` call."""

    def __init__(
        self,
        frames: Sequence[ImageGrid],
        intrinsics: CameraIntrinsics,
        config: CascadeConfig,
        poses: Optional[Sequence[PoseSE3]],
        target_index: int,
    ):
        self.frames = list(frames)
        self.intrinsics = intrinsics
        self.config = config
        self.poses = None if poses is None else list(poses)
        self.target_index = target_index
        self.warnings: list[str] = []
        height, width = self.frames[target_index].shape
        self.sigma_shapes = pyramid_shapes(height, width, config.scales)

    @property
    def target(self) -> ImageGrid:
        return self.frames[self.target_index]

    def known_pose(self, offset: int) -> PoseSE3:
        assert self.poses is not None
        t = self.target_index
        return relative_pose(self.poses[t], self.poses[t + offset])

    def settings(self, use_auto_mask: bool) -> LossSettings:
        return LossSettings(
            alpha=self.config.alpha,
            smoothness_weight=self.config.smoothness_weight,
            use_auto_mask=use_auto_mask,
            reduction=self.config.reduction,
        )

    def initial_sigmas(self) -> list[np.ndarray]:
        cfg = self.config
        sigma = float(depth_to_sigma(np.array(cfg.start_depth), cfg.min_depth, cfg.max_depth))
        return [np.full(shape, sigma) for shape in self.sigma_shapes]

    def inputs(
        self,
        offsets: Sequence[int],
        use_auto_mask: bool,
        photometric_gate: Optional[np.ndarray] = None,
        smoothness_gate: Optional[np.ndarray] = None,
    ) -> ObjectiveInputs:
        return ObjectiveInputs(
            target=self.target,
            sources=[self.frames[self.target_index + o] for o in offsets],
            intrinsics=self.intrinsics,
            min_depth=self.config.min_depth,
            max_depth=self.config.max_depth,
            photometric_gate=photometric_gate,
            smoothness_gate=smoothness_gate,
            settings=self.settings(use_auto_mask),
        )

    def layer_inputs(self, offsets: Sequence[int], mask: SightMask) -> ObjectiveInputs:
        """Stage-2 inputs: photometric term on the mask, smoothness on its dilation."""
        return self.inputs(
            offsets,
            use_auto_mask=False,
            photometric_gate=mask.mask,
            smoothness_gate=dilate_mask(mask.mask),
        )

    def depth_of(self, state: OptimizationState) -> np.ndarray:
        return sigma_to_depth(state.finest_sigma, self.config.min_depth, self.config.max_depth)


def _report(
    name: str,
    interval: Optional[tuple[float, float]],
    requested: Sequence[int],
    offsets: Sequence[int],
    coverage: float,
    result: OptimizationResult,
) -> LayerReport:
    return LayerReport(
        name=name,
        interval=interval,
        requested_offsets=list(requested),
        offsets=list(offsets),
        coverage=coverage,
        initial_loss=result.initial_loss,
        final_loss=result.final_loss,
        iterations=len(result.trace),
        trace=result.trace,
    )


def _stage_one(run: _CascadeRun) -> tuple[OptimizationResult, list[int], dict[int, PoseSE3]]:
    offsets = resolve_offsets([-1, 1], run.target_index, len(run.frames), run.warnings)
    inputs = run.inputs(offsets, use_auto_mask=True)
    if run.poses is not None:
        start_poses = [run.known_pose(o) for o in offsets]
    else:
        start_poses = [PoseSE3.identity() for _ in offsets]
    state0 = OptimizationState.from_poses(run.initial_sigmas(), start_poses)
    logger.info(f"Stage 1: rough depth from offsets {offsets}")
    result = optimize(state0, inputs, run.config.optimizer, freeze_pose=run.config.freeze_pose)
    estimated = {o: exp6(p) for o, p in zip(offsets, result.state.pose_params)}
    return result, offsets, estimated


def _layer_pose(run: _CascadeRun, offset: int, stage_one_poses: dict[int, PoseSE3]) -> PoseSE3:
    """Known pose, or the stage-1 neighbour pose repeated ``|offset|`` times."""
    if run.config.freeze_pose:
        return run.known_pose(offset)
    step = 1 if offset > 0 else -1
    if step in stage_one_poses:
        return power(stage_one_poses[step], abs(offset))
    # Only the opposite neighbour was estimated: assume constant velocity.
    return power(invert(stage_one_poses[-step]), abs(offset))


def _stage_two_layer(
    run: _CascadeRun,
    index: int,
    mask: SightMask,
    offsets: list[int],
    rough_state: OptimizationState,
    stage_one_poses: dict[int, PoseSE3],
) -> tuple[np.ndarray, LayerReport]:
    layer = run.config.layers[index]
    name = f"layer{index + 1}"
    if mask.is_empty:
        logger.info(f"{name}: empty sight mask, keeping the rough depth")
        report = LayerReport(
            name=name,
            interval=(mask.alpha, mask.beta),
            requested_offsets=list(layer.frame_offsets),
            offsets=offsets,
            coverage=0.0,
            skipped=True,
        )
        return run.depth_of(rough_state), report

    inputs = run.layer_inputs(offsets, mask)
    poses = [_layer_pose(run, o, stage_one_poses) for o in offsets]
    state0 = OptimizationState.from_poses([s.copy() for s in rough_state.sigmas], poses)
    logger.info(
        f"Stage 2 {name}: [{mask.alpha:g}, {mask.beta:g}) covering {mask.coverage:.1%}, "
        f"offsets {offsets}"
    )
    result = optimize(state0, inputs, run.config.optimizer, freeze_pose=run.config.freeze_pose)
    report = _report(
        name, (mask.alpha, mask.beta), layer.frame_offsets, offsets, mask.coverage, result
    )
    return run.depth_of(result.state), report


def run_cascade(
    frames: Sequence[ImageGrid],
    intrinsics: CameraIntrinsics,
    config: CascadeConfig,
    poses: Optional[Sequence[PoseSE3]] = None,
    target_index: Optional[int] = None,
    threads: int = 1,
) -> CascadeResult:
    """Run rough estimation, masked per-layer optimization and fusion.

    Args:
        frames: Ordered image sequence sharing one camera.
        intrinsics: Camera of every frame.
        config: Layers, offsets, depth bounds and optimizer settings.
        poses: ``camera_from_world`` pose per frame. Required when
            ``config.freeze_pose``; otherwise used as the starting point.
        target_index: Frame whose depth is estimated; defaults to
            ``config.target_index`` and then to the middle frame.
        threads: Upper bound on layers optimized concurrently.

    Returns:
        A :class:`CascadeResult` with fused, per-layer and rough depth.

    Raises:
        InvalidInputError: On too few frames, mismatched frames or poses,
            or a missing pose list with frozen poses.
    """
    frames = list(frames)
    if len(frames) < MIN_FRAMES:
        raise InvalidInputError(
            f"cascade needs at least {MIN_FRAMES} frames, got {len(frames)}"
        )
    for frame in frames[1:]:
        check_same_shape(frames[0], frame)
    if poses is not None and len(poses) != len(frames):
        raise InvalidInputError(f"{len(frames)} frames but {len(poses)} poses")
    if poses is None and config.freeze_pose:
        raise InvalidInputError("frozen poses require a pose for every frame")
    if target_index is None:
        target_index = config.target_index if config.target_index is not None else len(frames) // 2
    if not 0 <= target_index < len(frames):
        raise InvalidInputError(f"target index {target_index} outside [0, {len(frames)})")

    run = _CascadeRun(frames, intrinsics, config, poses, target_index)
    widest = max(abs(o) for layer in config.layers for o in layer.frame_offsets)
    if len(frames) < 2 * widest + 1:
        message = (
            f"{len(frames)} frames are fewer than the {2 * widest + 1} the widest offset "
            f"+-{widest} needs; offsets will be clamped"
        )
        logger.warning(message)
        run.warnings.append(message)

    layer_offsets = []
    for k, layer in enumerate(config.layers):
        offsets = resolve_offsets(layer.frame_offsets, target_index, len(frames), run.warnings)
        if not offsets:
            raise InvalidInputError(f"layer{k + 1} has no usable source frames")
        layer_offsets.append(offsets)

    stage_one, rough_offsets, stage_one_poses = _stage_one(run)
    rough_depth = run.depth_of(stage_one.state)
    auto_coverage = float(stage_one.breakdown.auto_mask.mean())
    degenerate = stage_one.breakdown.degenerate or auto_coverage == 0.0
    if degenerate:
        message = "stage 1 auto-mask rejected every pixel; input frames look static"
        logger.warning(message)
        run.warnings.append(message)
    rough_report = _report("rough", None, [-1, 1], rough_offsets, 1.0, stage_one)

    intervals = config.intervals
    if config.interval_mode == "relative":
        intervals = resolve_intervals(intervals, rough_depth)
    masks = generate_sight_masks(rough_depth, intervals)
    logger.info(
        "Sight masks: " + ", ".join(f"[{m.alpha:g}, {m.beta:g}) {m.coverage:.1%}" for m in masks)
    )

    workers = max(1, min(threads, len(masks)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(
                _stage_two_layer, run, k, mask, layer_offsets[k], stage_one.state, stage_one_poses
            )
            for k, mask in enumerate(masks)
        ]
        outcomes = [f.result() for f in futures]
    layer_depths = [depth for depth, _ in outcomes]
    layer_reports = [report for _, report in outcomes]

    fused = fuse_depth(masks, layer_depths)
    logger.info(f"Stage 3: fused {len(masks)} layers")
    report = CascadeReport(
        target_index=target_index,
        frame_count=len(frames),
        rough=rough_report,
        layers=layer_reports,
        intervals=[(m.alpha, m.beta) for m in masks],
        auto_mask_coverage=auto_coverage,
        degenerate=degenerate,
        warnings=list(run.warnings),
    )
    return CascadeResult(
        fused_depth=fused,
        layer_depths=layer_depths,
        rough_depth=rough_depth,
        masks=masks,
        report=report,
        rough_poses=stage_one_poses,
    )
