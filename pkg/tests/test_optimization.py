"""Unit tests for Adam, analytic gradients and the gradient checks."""

import csv

import numpy as np
import pytest

from cmden.errors import DivergenceError, InvalidInputError
from cmden.geometry import PoseSE3, depth_to_sigma
from cmden.optimization import (
    STAGES,
    AdamOptimizer,
    OptimizationState,
    OptimizerConfig,
    check_gradient,
    finite_difference_check,
    gradcheck_stages,
    loss_and_gradients,
    minimize,
    optimize,
    write_trace_csv,
)
from cmden.photometric import LossSettings, ObjectiveInputs
from cmden.synthscene import relative_pose


@pytest.fixture
def plane_inputs(plane_scene, plane_frames) -> ObjectiveInputs:
    """Objective inputs for the two-frame plane scene."""
    (target, _), (source, _) = plane_frames
    return ObjectiveInputs(
        target=target,
        sources=[source],
        intrinsics=plane_scene.intrinsics,
        settings=LossSettings(use_auto_mask=False),
    )


@pytest.fixture
def plane_state(plane_scene, rng) -> OptimizationState:
    """A two-scale state near but not at the plane depth."""
    fine = depth_to_sigma(rng.uniform(1.6, 2.6, (24, 32)))
    coarse = depth_to_sigma(np.full((12, 16), 2.2))
    return OptimizationState.from_poses([coarse, fine], [relative_pose(plane_scene, 0, 1)])


class TestOptimizerConfig:
    """Tests for OptimizerConfig."""

    def test_defaults(self):
        """Test default values."""
        config = OptimizerConfig()
        assert config.learning_rate == 1e-2
        assert config.max_iterations == 300

    def test_schedule(self):
        """Test that the tail rate applies to the last quarter."""
        config = OptimizerConfig(max_iterations=100, tail_fraction=0.25, tail_factor=0.1)
        assert config.rate_multiplier(74) == 1.0
        assert config.rate_multiplier(75) == pytest.approx(0.1)

    def test_validation(self):
        """Test that a non-positive learning rate is refused."""
        with pytest.raises(ValueError):
            OptimizerConfig(learning_rate=0.0)


class TestAdam:
    """Tests for the Adam step and minimize."""

    def test_first_step_size(self):
        """Test that the first bias-corrected step has the learning-rate magnitude."""
        optimizer = AdamOptimizer(OptimizerConfig(), [0.1])
        (updated,) = optimizer.step([np.array([1.0, -1.0])], [np.array([3.0, -0.5])])
        np.testing.assert_allclose(updated, [0.9, -0.9], atol=1e-6)

    def test_mismatched_groups(self):
        """Test that mismatched parameter groups raise."""
        optimizer = AdamOptimizer(OptimizerConfig(), [0.1])
        with pytest.raises(InvalidInputError):
            optimizer.step([np.zeros(2), np.zeros(2)], [np.zeros(2)])

    def test_minimize_quadratic(self):
        """Test convergence on a convex quadratic."""
        center = np.array([0.3, -1.2, 2.0])

        def objective(x):
            return float(np.sum((x - center) ** 2)), 2.0 * (x - center)

        config = OptimizerConfig(learning_rate=0.05, max_iterations=600)
        result = minimize(objective, np.zeros(3), config)
        np.testing.assert_allclose(result.x, center, atol=2e-2)
        assert result.loss <= result.losses[0]

    def test_minimize_projection(self):
        """Test that the projection keeps iterates in the box."""
        config = OptimizerConfig(learning_rate=0.1, max_iterations=100)
        result = minimize(
            lambda x: (float(np.sum((x - 5.0) ** 2)), 2.0 * (x - 5.0)),
            np.zeros(2),
            config,
            project=lambda x: np.clip(x, 0.0, 1.0),
        )
        assert np.all(result.x <= 1.0)

    def test_divergence(self):
        """Test that a growing loss raises with the history attached."""

        def ascent(x):
            return float(np.sum(x**2)), -2.0 * x

        config = OptimizerConfig(learning_rate=1.0, max_iterations=100, divergence_factor=10.0)
        with pytest.raises(DivergenceError) as info:
            minimize(ascent, np.ones(1), config)
        assert len(info.value.trace) > 1

    def test_tolerance_stops_early(self):
        """Test that a flat loss stops after the patience window."""
        config = OptimizerConfig(max_iterations=200, tolerance=1e-3, patience=5)
        result = minimize(lambda x: (1.0, np.zeros_like(x)), np.zeros(1), config)
        assert result.iterations < 200


class TestCheckGradient:
    """Tests for the generic gradient checker."""

    def test_correct_gradient(self):
        """Test a smooth function with its exact gradient."""
        x = np.array([0.3, -0.7, 1.1])
        result = check_gradient(
            lambda v: (float(np.sum(np.sin(v))), None), np.cos(x), x, range(3)
        )
        assert result.passed
        assert result.checked == 3

    def test_wrong_gradient(self):
        """Test that a scaled gradient fails."""
        x = np.array([0.3, -0.7])
        result = check_gradient(lambda v: (float(np.sum(v**2)), None), 3.0 * x, x, range(2))
        assert not result.passed
        assert result.worst_relative_error == pytest.approx(1.0 / 3.0, rel=1e-4)

    def test_kink_skipped(self):
        """Test that probes changing the regime are skipped."""
        x = np.array([0.0])
        result = check_gradient(
            lambda v: (float(abs(v[0])), bytes([v[0] >= 0])), np.array([1.0]), x, [0]
        )
        assert result.skipped == 1
        assert not result.passed

    def test_invalid_epsilon(self):
        """Test that a non-positive step raises."""
        with pytest.raises(InvalidInputError):
            check_gradient(lambda v: (0.0, None), np.zeros(1), np.zeros(1), [0], epsilon=0.0)


class TestObjectiveGradients:
    """Tests for the analytic gradient of the full objective."""

    def test_gradient_shapes(self, plane_state, plane_inputs):
        """Test that gradients match the state layout."""
        breakdown, bundle = loss_and_gradients(plane_state, plane_inputs)
        assert breakdown.total > 0
        assert [g.shape for g in bundle.sigma] == [(12, 16), (24, 32)]
        assert len(bundle.pose) == 1
        assert bundle.to_vector().size == plane_state.to_vector().size

    def test_finite_difference_agreement(self, plane_state, plane_inputs):
        """Test the analytic gradient against central differences."""
        result = finite_difference_check(plane_state, plane_inputs, sample_count=40, seed=3)
        assert result.checked > 0
        assert result.worst_relative_error <= 1e-4

    def test_corrupted_gradient_detected(self, plane_state, plane_inputs):
        """Test that a scaled gradient is reported as failing."""
        result = finite_difference_check(
            plane_state, plane_inputs, sample_count=20, gradient_scale=1.5
        )
        assert not result.passed


class TestGradcheckStages:
    """Tests for the per-stage gradient check."""

    def test_all_stages_pass(self):
        """Test that every stage is within tolerance on a small problem."""
        results = gradcheck_stages(size=8, probes=40, seed=0)
        assert [r.stage for r in results] == list(STAGES)
        failed = [r.to_dict() for r in results if not r.passed]
        assert not failed

    def test_corrupt_stage_fails(self):
        """Test that corrupting one stage makes exactly that stage fail."""
        results = gradcheck_stages(size=8, probes=20, seed=0, corrupt_stage="pe_map")
        by_stage = {r.stage: r for r in results}
        assert not by_stage["pe_map"].passed

    def test_invalid_arguments(self):
        """Test argument validation."""
        with pytest.raises(InvalidInputError, match="probes must be >= 1"):
            gradcheck_stages(size=8, probes=0)
        with pytest.raises(InvalidInputError):
            gradcheck_stages(size=2)
        with pytest.raises(InvalidInputError):
            gradcheck_stages(size=8, corrupt_stage="nonexistent")


class TestOptimize:
    """Tests for the sigma/pose optimization loop."""

    def test_loss_never_increases(self, plane_state, plane_inputs):
        """Test that the returned loss does not exceed the initial loss."""
        config = OptimizerConfig(learning_rate=5e-3, max_iterations=15)
        result = optimize(plane_state, plane_inputs, config)
        assert result.final_loss <= result.initial_loss
        assert len(result.trace) == 16
        assert result.trace[0].iteration == 0

    def test_frozen_pose_unchanged(self, plane_state, plane_inputs):
        """Test that frozen poses are returned untouched."""
        config = OptimizerConfig(max_iterations=5)
        result = optimize(plane_state, plane_inputs, config, freeze_pose=True)
        np.testing.assert_array_equal(result.state.pose_params[0], plane_state.pose_params[0])

    def test_zero_gradient_start_unchanged(self, textured_image, small_intrinsics):
        """Test that a stationary start comes back untouched."""
        inputs = ObjectiveInputs(
            target=textured_image,
            sources=[textured_image],
            intrinsics=small_intrinsics,
            settings=LossSettings(use_auto_mask=False),
        )
        sigma = depth_to_sigma(np.full((12, 16), 3.0))
        state0 = OptimizationState.from_poses([sigma], [PoseSE3.identity()])
        _, gradients = loss_and_gradients(state0, inputs)
        assert not np.any(gradients.sigma[0])

        result = optimize(state0, inputs, OptimizerConfig(max_iterations=5))

        np.testing.assert_array_equal(result.state.sigmas[0], state0.sigmas[0])
        assert result.final_loss == result.initial_loss

    def test_sigmas_stay_in_range(self, plane_state, plane_inputs):
        """Test that sigma grids stay inside the unit interval."""
        config = OptimizerConfig(learning_rate=0.5, max_iterations=5)
        result = optimize(plane_state, plane_inputs, config, freeze_pose=False)
        for sigma in result.state.sigmas:
            assert sigma.min() >= 0.0 and sigma.max() <= 1.0

    def test_callback_and_trace_csv(self, plane_state, plane_inputs, temp_directory):
        """Test the per-iteration callback and the CSV trace."""
        seen = []
        config = OptimizerConfig(max_iterations=3)
        result = optimize(plane_state, plane_inputs, config, callback=seen.append)
        assert len(seen) == 4
        path = write_trace_csv(temp_directory / "trace.csv", result.trace)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 4
        assert set(rows[0]) == {"iteration", "photometric", "smoothness", "total", "valid_fraction"}
