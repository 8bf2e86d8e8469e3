"""Central-difference verification of the hand-written adjoints.

Every checked quantity is piecewise smooth: the sampler switches cells,
L1 terms switch sign and the ``min`` reduction switches views. A probe
whose ``x +/- epsilon`` evaluations land in a different piece than ``x``
is skipped rather than counted as a failure.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from cmden.errors import InvalidInputError
from cmden.geometry.camera import CameraIntrinsics
from cmden.geometry.depth import sigma_to_depth, sigma_to_depth_derivative
from cmden.geometry.pose import exp6
from cmden.geometry.warp import warp_adjoint, warp_coordinates
from cmden.imaging.grid import ImageGrid
from cmden.imaging.resize import upsample_adjoint, upsample_array
from cmden.imaging.sampling import bilinear_sample, bilinear_sample_adjoint
from cmden.optimization.gradients import OptimizationState, evaluate_state
from cmden.photometric.losses import (
    pe_adjoint,
    pe_forward,
    smoothness_adjoint,
    smoothness_forward,
)
from cmden.photometric.objective import LossSettings, ObjectiveInputs, forward_objective

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-5
DEFAULT_TOLERANCE = 1e-4
ERROR_FLOOR = 1e-6
STAGES = (
    "sigma_to_depth",
    "upsample_bilinear",
    "warp_coordinates",
    "bilinear_sample",
    "pe_map",
    "smoothness",
    "total_loss",
)
CORRUPTION_FACTOR = 1.5

# Returns the scalar value and a fingerprint of the smooth piece, or None
# when the function is smooth everywhere.
Probe = Callable[[np.ndarray], tuple[float, Optional[bytes]]]


@dataclass
class GradientCheckResult:
    """Outcome of comparing an analytic gradient with central differences."""

    stage: str
    worst_relative_error: float
    worst_coordinate: Optional[int]
    checked: int
    skipped: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.worst_relative_error <= self.tolerance

    def to_dict(self) -> dict:
        data = asdict(self)
        data["passed"] = self.passed
        return data


def relative_error(analytic: float, numeric: float, floor: float = ERROR_FLOOR) -> float:
    """``|a - n| / max(|a|, |n|, floor)``."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradient(
    probe: Probe,
    gradient: np.ndarray,
    x: np.ndarray,
    coordinates: Sequence[int],
    epsilon: float = DEFAULT_EPSILON,
    tolerance: float = DEFAULT_TOLERANCE,
    stage: str = "function",
    floor: float = ERROR_FLOOR,
) -> GradientCheckResult:
    """Compare ``gradient`` with central differences of ``probe`` at ``x``.

    Args:
        probe: Scalar function of a flat vector, returning ``(value, regime)``.
        gradient: Analytic gradient at ``x``, same size as ``x``.
        x: Point of evaluation (flat).
        coordinates: Indices of ``x`` to perturb.
        epsilon: Half-width of the central difference.
        tolerance: Largest acceptable relative error.
        stage: Label carried into the result.
        floor: Lower bound of the relative-error denominator.

    Returns:
        The worst relative error over the probes that stayed inside the
        smooth piece of ``x``.

    Raises:
        InvalidInputError: If ``epsilon`` is not positive or sizes disagree.
    """
    if epsilon <= 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64).ravel()
    gradient = np.asarray(gradient, dtype=np.float64).ravel()
    if gradient.size != x.size:
        raise InvalidInputError(f"gradient has {gradient.size} entries, point has {x.size}")

    _, base_regime = probe(x)
    worst, worst_index = 0.0, None
    checked = skipped = 0
    for index in coordinates:
        plus = x.copy()
        plus[index] += epsilon
        minus = x.copy()
        minus[index] -= epsilon
        f_plus, regime_plus = probe(plus)
        f_minus, regime_minus = probe(minus)
        if base_regime is not None and (regime_plus != base_regime or regime_minus != base_regime):
            skipped += 1
            logger.debug(f"{stage}: probe at coordinate {index} crosses a kink, skipped")
            continue
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        error = relative_error(float(gradient[index]), numeric, floor)
        checked += 1
        if worst_index is None or error > worst:
            worst, worst_index = error, int(index)

    if skipped:
        logger.info(f"{stage}: skipped {skipped} of {skipped + checked} probes at kinks")
    return GradientCheckResult(
        stage=stage,
        worst_relative_error=worst,
        worst_coordinate=worst_index,
        checked=checked,
        skipped=skipped,
        tolerance=tolerance,
    )


def _sample_coordinates(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    if count >= size:
        return np.arange(size)
    return np.sort(rng.choice(size, size=count, replace=False))


def finite_difference_check(
    state: OptimizationState,
    inputs: ObjectiveInputs,
    epsilon: float = DEFAULT_EPSILON,
    sample_count: int = 100,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    gradient_scale: float = 1.0,
) -> GradientCheckResult:
    """Check the full objective gradient on sampled sigma entries and every pose entry.

    ``gradient_scale`` multiplies the analytic gradient before comparison;
    values other than 1 exist only to exercise failure reporting.
    """
    if sample_count < 1:
        raise InvalidInputError(f"sample_count must be >= 1, got {sample_count}")
    evaluation = evaluate_state(state, inputs, with_gradients=True)
    assert evaluation.gradients is not None
    gradient = evaluation.gradients.to_vector() * gradient_scale
    x = state.to_vector()

    rng = np.random.default_rng(seed)
    sigma_size = state.sigma_size
    coordinates = list(_sample_coordinates(rng, sigma_size, sample_count))
    coordinates += list(range(sigma_size, x.size))

    def probe(vector: np.ndarray) -> tuple[float, Optional[bytes]]:
        trial = state.with_vector(vector)
        forward = forward_objective(trial.sigmas, trial.poses, inputs)
        return forward.breakdown.total, forward.regime_key()

    return check_gradient(
        probe, gradient, x, coordinates, epsilon, tolerance, stage="total_loss"
    )


def _smooth_image(rng: np.random.Generator, height: int, width: int, channels: int) -> np.ndarray:
    """Sum of low-frequency sinusoids scaled into ``[0.1, 0.9]``."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    image = np.zeros((height, width, channels))
    for _ in range(4):
        fx, fy = rng.uniform(-0.12, 0.12, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=channels)
        wave = 2 * np.pi * (fx * xs + fy * ys)
        image += np.sin(wave[..., None] + phase)
    image -= image.min()
    return 0.1 + 0.8 * image / max(image.max(), 1e-12)


def _nudge_off_lattice(values: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    frac = values - np.floor(values)
    return np.where((frac < margin) | (frac > 1 - margin), values + 10 * margin, values)


def gradcheck_stages(
    size: int = 16,
    probes: int = 200,
    seed: int = 0,
    epsilon: float = DEFAULT_EPSILON,
    tolerance: float = DEFAULT_TOLERANCE,
    corrupt_stage: Optional[str] = None,
) -> list[GradientCheckResult]:
    """Check every stage's adjoint on a seeded random problem.

    Args:
        size: Side length of the square test grids.
        probes: Sampled coordinates per stage (pose entries are always added).
        seed: Seed for the random problem and coordinate sampling.
        epsilon: Central-difference half-width.
        tolerance: Largest acceptable relative error.
        corrupt_stage: Stage whose analytic gradient is scaled by 1.5
            before comparison, for testing the failure path.

    Returns:
        One :class:`GradientCheckResult` per entry of :data:`STAGES`.

    Raises:
        InvalidInputError: On ``size < 4``, ``probes < 1`` or an unknown stage.
    """
    if size < 4:
        raise InvalidInputError(f"size must be >= 4, got {size}")
    if probes < 1:
        raise InvalidInputError("probes must be >= 1")
    if corrupt_stage is not None and corrupt_stage not in STAGES:
        raise InvalidInputError(f"unknown stage '{corrupt_stage}', expected one of {STAGES}")

    rng = np.random.default_rng(seed)
    channels = 3
    min_depth, max_depth = 1.0, 10.0
    intrinsics = CameraIntrinsics(
        fx=float(size),
        fy=float(size),
        cx=(size - 1) / 2,
        cy=(size - 1) / 2,
        width=size,
        height=size,
    )

    def factor(stage: str) -> float:
        return CORRUPTION_FACTOR if stage == corrupt_stage else 1.0

    def run(
        stage: str, probe: Probe, gradient: np.ndarray, x: np.ndarray, coords: Sequence[int]
    ) -> GradientCheckResult:
        result = check_gradient(
            probe, gradient * factor(stage), x, coords, epsilon, tolerance, stage=stage
        )
        level = logging.DEBUG if result.passed else logging.WARNING
        logger.log(level, f"{stage}: worst relative error {result.worst_relative_error:.3e}")
        return result

    results = []
    shape = (size, size)

    # sigma -> depth
    sigma = rng.uniform(0.1, 0.9, size=shape)
    weights = rng.normal(size=shape)

    def sigma_probe(v: np.ndarray) -> tuple[float, Optional[bytes]]:
        return float(np.sum(weights * sigma_to_depth(v.reshape(shape), min_depth, max_depth))), None

    results.append(
        run(
            "sigma_to_depth",
            sigma_probe,
            weights * sigma_to_depth_derivative(sigma, min_depth, max_depth),
            sigma.ravel(),
            _sample_coordinates(rng, sigma.size, probes),
        )
    )

    # coarse grid -> full-resolution bilinear upsample
    coarse_shape = (size // 2, size // 2)
    coarse = rng.uniform(size=coarse_shape)
    up_weights = rng.normal(size=shape)

    def upsample_probe(v: np.ndarray) -> tuple[float, Optional[bytes]]:
        return float(np.sum(up_weights * upsample_array(v.reshape(coarse_shape), size, size))), None

    results.append(
        run(
            "upsample_bilinear",
            upsample_probe,
            upsample_adjoint(up_weights, *coarse_shape),
            coarse.ravel(),
            _sample_coordinates(rng, coarse.size, probes),
        )
    )

    # depth and pose -> source coordinates
    depth = rng.uniform(1.5, 4.0, size=shape)
    params = np.concatenate([rng.normal(0, 0.05, 3), rng.normal(0, 0.1, 3)])
    wx, wy = rng.normal(size=shape), rng.normal(size=shape)
    n_depth = depth.size

    def warp_probe(v: np.ndarray) -> tuple[float, Optional[bytes]]:
        warp = warp_coordinates(v[:n_depth].reshape(shape), exp6(v[n_depth:]), intrinsics)
        value = float(np.sum(np.where(warp.valid, wx * warp.xs + wy * warp.ys, 0.0)))
        return value, np.packbits(warp.valid).tobytes()

    warp = warp_coordinates(depth, exp6(params), intrinsics)
    g_depth, g_params = warp_adjoint(warp, wx, wy, params)
    results.append(
        run(
            "warp_coordinates",
            warp_probe,
            np.concatenate([g_depth.ravel(), g_params]),
            np.concatenate([depth.ravel(), params]),
            list(_sample_coordinates(rng, n_depth, probes)) + list(range(n_depth, n_depth + 6)),
        )
    )

    # coordinates -> bilinear sample
    source = ImageGrid(_smooth_image(rng, size, size, channels))
    xs = _nudge_off_lattice(rng.uniform(0.5, size - 1.5, size=shape))
    ys = _nudge_off_lattice(rng.uniform(0.5, size - 1.5, size=shape))
    sample_weights = rng.normal(size=(size, size, channels))

    def sample_probe(v: np.ndarray) -> tuple[float, Optional[bytes]]:
        px, py = v[:n_depth].reshape(shape), v[n_depth:].reshape(shape)
        view = bilinear_sample(source, px, py)
        regime = np.floor(np.stack([px, py])).astype(np.int32).tobytes()
        return float(np.sum(sample_weights * view.image.data)), regime

    view = bilinear_sample(source, xs, ys)
    g_xs, g_ys = bilinear_sample_adjoint(source, view, sample_weights)
    results.append(
        run(
            "bilinear_sample",
            sample_probe,
            np.concatenate([g_xs.ravel(), g_ys.ravel()]),
            np.concatenate([xs.ravel(), ys.ravel()]),
            _sample_coordinates(rng, 2 * n_depth, probes),
        )
    )

    # synthesized image -> photometric error
    target = _smooth_image(rng, size, size, channels)
    synthesized = np.clip(target + rng.normal(0, 0.05, size=target.shape), 0.0, 1.0)
    pe_weights = rng.normal(size=shape)
    image_shape = target.shape

    def pe_probe(v: np.ndarray) -> tuple[float, Optional[bytes]]:
        forward = pe_forward(target, v.reshape(image_shape))
        regime = np.sign(forward.diff).astype(np.int8).tobytes()
        regime += np.packbits(forward.ssim.clipped).tobytes()
        return float(np.sum(pe_weights * forward.value)), regime

    results.append(
        run(
            "pe_map",
            pe_probe,
            pe_adjoint(pe_forward(target, synthesized), pe_weights),
            synthesized.ravel(),
            _sample_coordinates(rng, synthesized.size, probes),
        )
    )

    # inverse depth -> gated edge-aware smoothness
    inverse = rng.uniform(0.3, 1.0, size=shape)
    guide = _smooth_image(rng, size, size, channels)
    smooth_gate = rng.uniform(size=shape) > 0.2

    def smooth_probe(v: np.ndarray) -> tuple[float, Optional[bytes]]:
        forward = smoothness_forward(v.reshape(shape), guide, smooth_gate)
        regime = np.sign(np.stack([forward.dx, forward.dy])).astype(np.int8).tobytes()
        return forward.value, regime

    results.append(
        run(
            "smoothness",
            smooth_probe,
            smoothness_adjoint(smoothness_forward(inverse, guide, smooth_gate), 1.0),
            inverse.ravel(),
            _sample_coordinates(rng, inverse.size, probes),
        )
    )

    # full multi-scale objective with poses
    inputs = ObjectiveInputs(
        target=ImageGrid(_smooth_image(rng, size, size, channels)),
        sources=[ImageGrid(_smooth_image(rng, size, size, channels)) for _ in range(2)],
        intrinsics=intrinsics,
        min_depth=min_depth,
        max_depth=max_depth,
        settings=LossSettings(smoothness_weight=0.05, use_auto_mask=True, reduction="min"),
    )
    state = OptimizationState(
        sigmas=[rng.uniform(0.2, 0.8, size=coarse_shape), rng.uniform(0.2, 0.8, size=shape)],
        pose_params=[
            np.concatenate([rng.normal(0, 0.02, 3), rng.normal(0, 0.05, 3)]) for _ in range(2)
        ],
    )
    total = finite_difference_check(
        state,
        inputs,
        epsilon=epsilon,
        sample_count=probes,
        seed=seed,
        tolerance=tolerance,
        gradient_scale=factor("total_loss"),
    )
    level = logging.DEBUG if total.passed else logging.WARNING
    logger.log(level, f"total_loss: worst relative error {total.worst_relative_error:.3e}")
    results.append(total)
    return results
