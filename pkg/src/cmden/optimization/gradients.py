"""Reverse-mode gradients of the multi-scale objective.

The pipeline is a fixed graph, so the reverse pass is written out stage by
stage: total -> reduction -> pe -> sampler -> warp -> inverse depth ->
upsample -> sigma, plus the smoothness branch and the pose parameters.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from cmden.errors import InvalidInputError, NonFiniteError
from cmden.geometry.depth import depth_coefficients
from cmden.geometry.pose import PoseSE3, exp6
from cmden.geometry.warp import warp_adjoint_inverse_depth
from cmden.imaging.resize import upsample_adjoint
from cmden.imaging.sampling import bilinear_sample_adjoint
from cmden.photometric.losses import pe_adjoint, smoothness_adjoint
from cmden.photometric.objective import (
    LossBreakdown,
    ObjectiveForward,
    ObjectiveInputs,
    forward_objective,
)

logger = logging.getLogger(__name__)


@dataclass
class OptimizationState:
    """Optimized variables: sigma per scale (coarse to fine) and pose params per source."""

    sigmas: list[np.ndarray]
    pose_params: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.sigmas = [np.array(s, dtype=np.float64) for s in self.sigmas]
        self.pose_params = [np.array(p, dtype=np.float64).reshape(6) for p in self.pose_params]

    @classmethod
    def from_poses(cls, sigmas: list[np.ndarray], poses: list[PoseSE3]) -> "OptimizationState":
        return cls(sigmas=sigmas, pose_params=[p.params for p in poses])

    @property
    def poses(self) -> list[PoseSE3]:
        return [exp6(p) for p in self.pose_params]

    @property
    def finest_sigma(self) -> np.ndarray:
        return self.sigmas[-1]

    def copy(self) -> "OptimizationState":
        return OptimizationState(sigmas=self.sigmas, pose_params=self.pose_params)

    def to_vector(self) -> np.ndarray:
        parts = [s.ravel() for s in self.sigmas] + [p for p in self.pose_params]
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_vector(self, vector: np.ndarray) -> "OptimizationState":
        """A state of the same layout filled from a flat vector."""
        sigmas, params = [], []
        offset = 0
        for s in self.sigmas:
            sigmas.append(vector[offset : offset + s.size].reshape(s.shape))
            offset += s.size
        for _ in self.pose_params:
            params.append(vector[offset : offset + 6])
            offset += 6
        if offset != vector.size:
            raise InvalidInputError(f"vector has {vector.size} entries, state has {offset}")
        return OptimizationState(sigmas=sigmas, pose_params=params)

    @property
    def sigma_size(self) -> int:
        return int(sum(s.size for s in self.sigmas))


@dataclass
class GradientBundle:
    """Gradients of the total loss, laid out like :class:`OptimizationState`."""

    sigma: list[np.ndarray]
    pose: list[np.ndarray]

    def to_vector(self) -> np.ndarray:
        parts = [s.ravel() for s in self.sigma] + list(self.pose)
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))


@dataclass
class ObjectiveEvaluation:
    forward: ObjectiveForward
    gradients: Optional[GradientBundle] = None

    @property
    def breakdown(self) -> LossBreakdown:
        return self.forward.breakdown


def _check_finite(stage: str, array: np.ndarray) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(stage)


def backward_objective(
    forward: ObjectiveForward, inputs: ObjectiveInputs, pose_params: list[np.ndarray]
) -> GradientBundle:
    """Analytic gradients of ``forward.breakdown.total``."""
    settings = inputs.settings
    a, _ = depth_coefficients(inputs.min_depth, inputs.max_depth)
    n_scales = len(forward.scales)
    pose_grads = [np.zeros(6) for _ in inputs.sources]
    sigma_grads = []

    for scale in forward.scales:
        scale_weight = 1.0 / n_scales
        grad_pixel = np.zeros(inputs.shape)
        if scale.effective_count:
            grad_pixel[scale.effective] = scale_weight / scale.effective_count

        grad_inverse = np.zeros(inputs.shape)
        for k, source in enumerate(inputs.sources):
            grad_pe = scale.reduction.weights[k] * grad_pixel
            if not np.any(grad_pe):
                continue
            grad_view = pe_adjoint(scale.photometric[k], grad_pe)
            _check_finite("pe_map_adjoint", grad_view)
            grad_xs, grad_ys = bilinear_sample_adjoint(source, scale.views[k], grad_view)
            _check_finite("bilinear_sample_adjoint", grad_xs)
            _check_finite("bilinear_sample_adjoint", grad_ys)
            g_inv, g_params = warp_adjoint_inverse_depth(
                scale.warps[k], grad_xs, grad_ys, pose_params[k]
            )
            _check_finite("warp_coordinates_adjoint", g_inv)
            grad_inverse += g_inv
            pose_grads[k] += g_params

        if settings.smoothness_weight:
            grad_inverse += smoothness_adjoint(
                scale.smoothness, settings.smoothness_weight * scale_weight
            )
        _check_finite("smoothness_adjoint", grad_inverse)
        grad_sigma = upsample_adjoint(a * grad_inverse, *scale.sigma_shape)
        _check_finite("upsample_adjoint", grad_sigma)
        sigma_grads.append(grad_sigma)

    for grad in pose_grads:
        _check_finite("pose_adjoint", grad)
    return GradientBundle(sigma=sigma_grads, pose=pose_grads)


def evaluate_state(
    state: OptimizationState, inputs: ObjectiveInputs, with_gradients: bool = True
) -> ObjectiveEvaluation:
    """Forward pass and, optionally, the reverse pass."""
    forward = forward_objective(state.sigmas, state.poses, inputs)
    gradients = None
    if with_gradients:
        gradients = backward_objective(forward, inputs, state.pose_params)
    return ObjectiveEvaluation(forward=forward, gradients=gradients)


def loss_and_gradients(
    state: OptimizationState, inputs: ObjectiveInputs
) -> tuple[LossBreakdown, GradientBundle]:
    """Loss breakdown and exact gradients for a state.

    Raises:
        InvalidInputError: If sigma leaves ``[0, 1]`` or shapes disagree.
        NonFiniteError: Naming the first stage producing NaN or inf.
    """
    evaluation = evaluate_state(state, inputs, with_gradients=True)
    assert evaluation.gradients is not None
    return evaluation.breakdown, evaluation.gradients
