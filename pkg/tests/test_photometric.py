"""Unit tests for SSIM, photometric error, reductions, auto-mask and smoothness."""

import numpy as np
import pytest

from cmden.errors import InvalidInputError
from cmden.geometry import PoseSE3, depth_to_sigma
from cmden.imaging import ImageGrid, SampledView, bilinear_sample
from cmden.photometric import (
    LossSettings,
    auto_mask,
    multiscale_total_loss,
    pe_map,
    reduce_errors,
    reprojection_loss,
    smoothness_loss,
    ssim_map,
)
from cmden.photometric.ssim import C1
from cmden.synthscene import relative_pose


def _constant_view(value: float, shape=(2, 2)) -> SampledView:
    return SampledView(image=ImageGrid(np.full(shape, value)), validity=np.ones(shape, bool))


class TestSSIM:
    """Tests for the SSIM map."""

    def test_identical_images(self, textured_image):
        """Test that SSIM of an image with itself is 1."""
        result = ssim_map(textured_image, textured_image)
        np.testing.assert_allclose(result.data, 1.0, atol=1e-9)

    def test_constant_images(self):
        """Test SSIM of constant 0 against constant 1."""
        result = ssim_map(ImageGrid(np.zeros((4, 4))), ImageGrid(np.ones((4, 4))))
        np.testing.assert_allclose(result.data, C1 / (1.0 + C1), rtol=1e-9)

    def test_symmetric(self, textured_image, rng):
        """Test that swapping the arguments gives the same map."""
        other = ImageGrid(rng.uniform(0.0, 1.0, textured_image.data.shape))

        forward = ssim_map(textured_image, other).data
        backward = ssim_map(other, textured_image).data

        np.testing.assert_allclose(forward, backward, rtol=0, atol=1e-15)

    def test_shape_mismatch(self):
        """Test that differing shapes raise."""
        with pytest.raises(InvalidInputError):
            ssim_map(ImageGrid(np.zeros((4, 4))), ImageGrid(np.zeros((4, 5))))


class TestPhotometricError:
    """Tests for pe_map."""

    def test_constant_example(self):
        """Test pe of constant 0 against constant 1 at alpha 0.85."""
        result = pe_map(ImageGrid(np.zeros((4, 4))), ImageGrid(np.ones((4, 4))), alpha=0.85)
        np.testing.assert_allclose(result.data, 0.574957, atol=1e-6)

    def test_identical_is_zero(self, textured_image):
        """Test that identical images give zero error."""
        np.testing.assert_allclose(pe_map(textured_image, textured_image).data, 0.0, atol=1e-9)

    def test_plain_l1(self):
        """Test that alpha 0 gives absolute difference."""
        result = pe_map(ImageGrid(np.full((3, 3), 0.2)), ImageGrid(np.full((3, 3), 0.5)), alpha=0.0)
        np.testing.assert_allclose(result.data, 0.3)

    def test_alpha_range(self, textured_image):
        """Test that alpha outside [0, 1] raises."""
        with pytest.raises(InvalidInputError):
            pe_map(textured_image, textured_image, alpha=1.5)


class TestReductions:
    """Tests for per-pixel reductions over views."""

    def test_min_and_sum(self):
        """Test min and sum of two constant error maps."""
        errors = [np.full((2, 2), 0.2), np.full((2, 2), 0.5)]
        valid = [np.ones((2, 2), bool)] * 2
        np.testing.assert_allclose(reduce_errors(errors, valid, "min").per_pixel, 0.2)
        np.testing.assert_allclose(reduce_errors(errors, valid, "sum").per_pixel, 0.7)
        np.testing.assert_allclose(reduce_errors(errors, valid, "mean").per_pixel, 0.35)

    def test_invalid_view_ignored(self):
        """Test that an invalid view never wins the minimum."""
        errors = [np.full((1, 2), 0.1), np.full((1, 2), 0.4)]
        valid = [np.array([[False, True]]), np.ones((1, 2), bool)]
        result = reduce_errors(errors, valid, "min")
        np.testing.assert_allclose(result.per_pixel, [[0.4, 0.1]])
        np.testing.assert_array_equal(result.selection, [[1, 0]])

    def test_all_invalid_pixel(self):
        """Test that a pixel invalid everywhere is 0 and marked invalid."""
        result = reduce_errors([np.ones((1, 1))], [np.zeros((1, 1), bool)], "min")
        assert result.per_pixel[0, 0] == 0.0
        assert not result.valid[0, 0]

    def test_errors(self):
        """Test empty input and unknown reduction."""
        with pytest.raises(InvalidInputError):
            reduce_errors([], [], "min")
        with pytest.raises(InvalidInputError):
            reduce_errors([np.ones((1, 1))], [np.ones((1, 1), bool)], "median")

    def test_reprojection_loss(self):
        """Test the scalar reprojection loss in plain L1 mode."""
        target = ImageGrid(np.full((2, 2), 0.5))
        views = [_constant_view(0.7), _constant_view(1.0)]
        assert reprojection_loss(target, views, "min", alpha=0.0).value == pytest.approx(0.2)
        assert reprojection_loss(target, views, "sum", alpha=0.0).value == pytest.approx(0.7)

    def test_reprojection_loss_empty(self):
        """Test that no views raises."""
        with pytest.raises(InvalidInputError):
            reprojection_loss(ImageGrid(np.zeros((2, 2))), [])


class TestAutoMask:
    """Tests for the auto-mask."""

    def test_identical_frames_masked(self, textured_image):
        """Test that a source equal to the target masks every pixel."""
        ys, xs = np.mgrid[0:12, 0:16].astype(np.float64)
        view = bilinear_sample(textured_image, xs, ys)
        mask = auto_mask(textured_image, [textured_image], [view])
        assert not mask.any()

    def test_better_reconstruction_kept(self):
        """Test that pixels the warp explains better are kept."""
        target = ImageGrid(np.full((4, 4), 0.5))
        source = ImageGrid(np.full((4, 4), 0.9))
        mask = auto_mask(target, [source], [_constant_view(0.5, (4, 4))], alpha=0.0)
        assert mask.all()

    def test_misaligned_lists(self, textured_image):
        """Test that mismatched source and view counts raise."""
        with pytest.raises(InvalidInputError):
            auto_mask(textured_image, [textured_image, textured_image], [])


class TestSmoothness:
    """Tests for edge-aware smoothness."""

    def test_ramp_example(self):
        """Test the mean-normalized inverse depth ramp [1, 2, 3]."""
        depth = 1.0 / np.array([[1.0, 2.0, 3.0]])
        image = ImageGrid(np.full((1, 3), 0.5))
        assert smoothness_loss(depth, image) == pytest.approx(1.0 / 3.0)

    def test_constant_depth(self, textured_image):
        """Test that constant depth has zero smoothness cost."""
        assert smoothness_loss(np.full((12, 16), 4.0), textured_image) == 0.0

    def test_scale_invariance(self, textured_image, rng):
        """Test that scaling depth leaves the term unchanged."""
        depth = rng.uniform(1.0, 5.0, (12, 16))
        assert smoothness_loss(depth, textured_image) == pytest.approx(
            smoothness_loss(3.0 * depth, textured_image)
        )

    def test_empty_gate(self, textured_image, rng):
        """Test that an empty gate gives zero."""
        depth = rng.uniform(1.0, 5.0, (12, 16))
        assert smoothness_loss(depth, textured_image, np.zeros((12, 16), bool)) == 0.0


class TestMultiscaleTotalLoss:
    """Tests for the full objective."""

    def test_true_depth_beats_wrong_depth(self, plane_scene, plane_frames):
        """Test that the ground-truth plane depth gives the lower loss."""
        (target, _), (source, _) = plane_frames
        pose = relative_pose(plane_scene, 0, 1)
        camera = plane_scene.intrinsics

        def loss_at(depth: float) -> float:
            sigma = depth_to_sigma(np.full(camera.shape, depth))
            return multiscale_total_loss(
                target, [source], [sigma], pose, camera, use_auto_mask=False
            ).total

        assert loss_at(2.0) < loss_at(0.5)

    def test_identical_frames_degenerate(self, textured_image, small_intrinsics):
        """Test that a static pair is fully auto-masked and degenerate."""
        sigma = depth_to_sigma(np.full((12, 16), 3.0))
        breakdown = multiscale_total_loss(
            textured_image, [textured_image], [sigma], PoseSE3.identity(), small_intrinsics
        )
        assert breakdown.degenerate
        assert breakdown.photometric == 0.0
        assert not breakdown.auto_mask.any()

    def test_total_composition(self, textured_image, small_intrinsics, rng):
        """Test that total equals photometric plus weighted smoothness."""
        sigmas = [rng.uniform(0.2, 0.4, (6, 8)), rng.uniform(0.2, 0.4, (12, 16))]
        pose = PoseSE3(rotation=np.eye(3), translation=np.array([0.05, 0.0, 0.0]))
        breakdown = multiscale_total_loss(
            textured_image, [textured_image], sigmas, pose, small_intrinsics,
            smoothness_weight=0.1, use_auto_mask=False,
        )
        assert breakdown.total == pytest.approx(
            breakdown.photometric + 0.1 * breakdown.smoothness
        )
        assert len(breakdown.per_scale) == 2

    def test_settings_validation(self):
        """Test that an unknown reduction is refused by the settings model."""
        with pytest.raises(ValueError):
            LossSettings(reduction="median")
