"""Analytic gradients, finite-difference checks and the Adam optimizer."""

from cmden.optimization.adam import AdamOptimizer, MinimizeResult, OptimizerConfig, minimize
from cmden.optimization.gradcheck import (
    STAGES,
    GradientCheckResult,
    check_gradient,
    finite_difference_check,
    gradcheck_stages,
)
from cmden.optimization.gradients import (
    GradientBundle,
    OptimizationState,
    evaluate_state,
    loss_and_gradients,
)
from cmden.optimization.run import OptimizationResult, TraceEntry, optimize, write_trace_csv

__all__ = [
    "AdamOptimizer",
    "GradientBundle",
    "GradientCheckResult",
    "MinimizeResult",
    "OptimizationResult",
    "OptimizationState",
    "OptimizerConfig",
    "STAGES",
    "TraceEntry",
    "check_gradient",
    "evaluate_state",
    "finite_difference_check",
    "gradcheck_stages",
    "loss_and_gradients",
    "minimize",
    "optimize",
    "write_trace_csv",
]
