"""Adaptive-moment gradient descent with a two-phase learning rate."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from cmden.errors import DivergenceError, InvalidInputError

logger = logging.getLogger(__name__)


class OptimizerConfig(BaseModel):
    """Adam hyper-parameters and stopping rules.

    The learning rate is ``learning_rate`` for the first
    ``1 - tail_fraction`` of ``max_iterations`` and
    ``learning_rate * tail_factor`` afterwards.
    """

    learning_rate: float = Field(default=1e-2, gt=0, description="Base rate for sigma")
    pose_learning_rate: float = Field(default=1e-3, gt=0, description="Base rate for pose params")
    tail_factor: float = Field(default=0.1, gt=0, le=1.0, description="Rate multiplier in the tail")
    tail_fraction: float = Field(
        default=0.25, ge=0.0, le=1.0, description="Fraction of iterations run at the tail rate"
    )
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0)
    max_iterations: int = Field(default=300, ge=1)
    tolerance: float = Field(
        default=0.0, ge=0.0, description="Stop when relative loss decrease over patience < this"
    )
    patience: int = Field(default=50, ge=1)
    divergence_factor: float = Field(default=1e6, gt=1.0)

    def rate_multiplier(self, iteration: int) -> float:
        """Schedule factor applied to both base rates at ``iteration``."""
        switch = int(round(self.max_iterations * (1.0 - self.tail_fraction)))
        return 1.0 if iteration < switch else self.tail_factor


class AdamOptimizer:
    """Adam over a list of numpy arrays.

    Each parameter group gets its own base learning rate; first and second
    moments are bias-corrected.
    """

    def __init__(self, config: OptimizerConfig, learning_rates: Sequence[float]):
        self.config = config
        self.learning_rates = list(learning_rates)
        self.step_count = 0
        self._m: Optional[list[np.ndarray]] = None
        self._v: Optional[list[np.ndarray]] = None

    def step(
        self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], multiplier: float = 1.0
    ) -> list[np.ndarray]:
        """Return updated copies of ``params``."""
        if len(params) != len(grads) or len(params) != len(self.learning_rates):
            raise InvalidInputError(
                f"got {len(params)} params, {len(grads)} grads, {len(self.learning_rates)} rates"
            )
        if self._m is None or self._v is None:
            self._m = [np.zeros_like(p, dtype=np.float64) for p in params]
            self._v = [np.zeros_like(p, dtype=np.float64) for p in params]
        cfg = self.config
        self.step_count += 1
        bias1 = 1.0 - cfg.beta1**self.step_count
        bias2 = 1.0 - cfg.beta2**self.step_count

        updated = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self._m[i] = cfg.beta1 * self._m[i] + (1.0 - cfg.beta1) * g
            self._v[i] = cfg.beta2 * self._v[i] + (1.0 - cfg.beta2) * (g * g)
            m_hat = self._m[i] / bias1
            v_hat = self._v[i] / bias2
            lr = self.learning_rates[i] * multiplier
            updated.append(p - lr * m_hat / (np.sqrt(v_hat) + cfg.eps))
        return updated


@dataclass
class MinimizeResult:
    x: np.ndarray
    loss: float
    iterations: int
    losses: list[float] = field(default_factory=list)


def minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    config: OptimizerConfig,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> MinimizeResult:
    """Minimize a differentiable function of one array with Adam.

    Args:
        objective: Returns ``(loss, gradient)`` at a point.
        x0: Starting point.
        config: Optimizer settings; ``learning_rate`` is used.
        project: Optional projection applied after every step.

    Returns:
        The lowest-loss point seen, with the loss history.

    Raises:
        DivergenceError: When the loss exceeds ``divergence_factor`` times
            the initial loss.
    """
    x = np.array(x0, dtype=np.float64)
    optimizer = AdamOptimizer(config, [config.learning_rate])
    losses: list[float] = []
    best_x, best_loss = x.copy(), np.inf
    initial: Optional[float] = None
    for iteration in range(config.max_iterations):
        loss, grad = objective(x)
        losses.append(float(loss))
        if initial is None:
            initial = float(loss)
        if loss < best_loss:
            best_x, best_loss = x.copy(), float(loss)
        if loss > config.divergence_factor * max(abs(initial), 1e-12):
            raise DivergenceError(f"loss diverged to {loss:.3e} at iteration {iteration}", losses)
        if loss_stalled(losses, config):
            logger.debug(f"Stopping at iteration {iteration}: relative decrease below tolerance")
            break
        multiplier = config.rate_multiplier(iteration)
        (x,) = optimizer.step([x], [np.asarray(grad, dtype=np.float64)], multiplier)
        if project is not None:
            x = project(x)
    else:
        loss, _ = objective(x)
        losses.append(float(loss))
        if loss < best_loss:
            best_x, best_loss = x.copy(), float(loss)
    return MinimizeResult(x=best_x, loss=best_loss, iterations=len(losses), losses=losses)


def loss_stalled(losses: Sequence[float], config: OptimizerConfig) -> bool:
    """True once the relative decrease over `patience` steps drops below `tolerance`."""
    if config.tolerance <= 0 or len(losses) <= config.patience:
        return False
    before = losses[-1 - config.patience]
    decrease = (before - losses[-1]) / max(abs(before), 1e-12)
    return decrease < config.tolerance
