"""Direct optimization of sigma fields and poses."""

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from cmden.errors import DivergenceError
from cmden.optimization.adam import AdamOptimizer, OptimizerConfig, loss_stalled
from cmden.optimization.gradients import OptimizationState, evaluate_state
from cmden.photometric.objective import LossBreakdown, ObjectiveInputs

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-4
SIGMA_CEILING = 1.0 - 1e-4
TRACE_COLUMNS = ("iteration", "photometric", "smoothness", "total", "valid_fraction")


@dataclass
class TraceEntry:
    iteration: int
    photometric: float
    smoothness: float
    total: float
    valid_fraction: float

    @classmethod
    def from_breakdown(cls, iteration: int, breakdown: LossBreakdown) -> "TraceEntry":
        return cls(
            iteration=iteration,
            photometric=breakdown.photometric,
            smoothness=breakdown.smoothness,
            total=breakdown.total,
            valid_fraction=breakdown.valid_fraction,
        )


@dataclass
class OptimizationResult:
    """Best state found together with the full loss trace."""

    state: OptimizationState
    breakdown: LossBreakdown
    trace: list[TraceEntry] = field(default_factory=list)
    best_iteration: int = 0
    initial_loss: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.breakdown.total


def clamp_sigmas(state: OptimizationState) -> OptimizationState:
    return OptimizationState(
        sigmas=[np.clip(s, SIGMA_FLOOR, SIGMA_CEILING) for s in state.sigmas],
        pose_params=state.pose_params,
    )


def optimize(
    state0: OptimizationState,
    inputs: ObjectiveInputs,
    config: OptimizerConfig,
    gate: Optional[np.ndarray] = None,
    freeze_pose: bool = True,
    callback: Optional[Callable[[TraceEntry], None]] = None,
) -> OptimizationResult:
    """Run Adam on the sigma grids (and optionally the poses).

    Args:
        state0: Starting sigma grids and pose parameters.
        inputs: Objective inputs.
        config: Optimizer settings.
        gate: Per-pixel photometric gate; overrides ``inputs.photometric_gate``.
        freeze_pose: Keep pose parameters fixed.
        callback: Called with every trace entry.

    Returns:
        The lowest-loss state seen, so the returned loss never exceeds the
        initial one.

    Raises:
        DivergenceError: When the loss exceeds ``divergence_factor`` times
            the initial loss; carries the trace.
    """
    if gate is not None:
        inputs = inputs.with_gates(gate, inputs.smoothness_gate)

    state = clamp_sigmas(state0)
    rates = [config.learning_rate] * len(state.sigmas)
    if not freeze_pose:
        rates += [config.pose_learning_rate] * len(state.pose_params)
    optimizer = AdamOptimizer(config, rates)

    trace: list[TraceEntry] = []
    best_state, best_breakdown, best_iteration = state, None, 0
    initial_loss: Optional[float] = None
    stop_reason = "max iterations"

    for iteration in range(config.max_iterations + 1):
        final_pass = iteration == config.max_iterations
        evaluation = evaluate_state(state, inputs, with_gradients=not final_pass)
        breakdown = evaluation.breakdown
        entry = TraceEntry.from_breakdown(iteration, breakdown)
        trace.append(entry)
        if callback is not None:
            callback(entry)

        if initial_loss is None:
            initial_loss = breakdown.total
        if best_breakdown is None or breakdown.total < best_breakdown.total:
            best_state, best_breakdown, best_iteration = state, breakdown, iteration
        if breakdown.total > config.divergence_factor * max(abs(initial_loss), 1e-12):
            logger.warning(f"Optimization diverged at iteration {iteration}")
            raise DivergenceError(
                f"loss {breakdown.total:.3e} exceeded {config.divergence_factor:g} x initial "
                f"{initial_loss:.3e} at iteration {iteration}",
                trace,
            )
        if final_pass:
            break
        if loss_stalled([e.total for e in trace], config):
            stop_reason = "tolerance"
            break

        gradients = evaluation.gradients
        assert gradients is not None
        params = list(state.sigmas)
        grads = list(gradients.sigma)
        if not freeze_pose:
            params += state.pose_params
            grads += gradients.pose
        updated = optimizer.step(params, grads, config.rate_multiplier(iteration))
        n_sigma = len(state.sigmas)
        new_pose = state.pose_params if freeze_pose else updated[n_sigma:]
        state = clamp_sigmas(OptimizationState(sigmas=updated[:n_sigma], pose_params=new_pose))

    assert best_breakdown is not None and initial_loss is not None
    logger.debug(
        f"Optimization stopped ({stop_reason}) after {len(trace)} evaluations; "
        f"loss {initial_loss:.6f} -> {best_breakdown.total:.6f} (best at {best_iteration})"
    )
    return OptimizationResult(
        state=best_state,
        breakdown=best_breakdown,
        trace=trace,
        best_iteration=best_iteration,
        initial_loss=initial_loss,
    )


def write_trace_csv(path: Path, trace: list[TraceEntry]) -> Path:
    """Write a loss trace with one row per iteration."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(TRACE_COLUMNS))
        writer.writeheader()
        for entry in trace:
            writer.writerow({k: _fmt(v) for k, v in asdict(entry).items()})
    logger.debug(f"Wrote loss trace to {path}")
    return path


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
