"""Unit tests for image grids, sampling, resizing and filters."""

import math

import numpy as np
import pytest

from cmden.errors import InvalidInputError
from cmden.geometry import CameraIntrinsics, PoseSE3, exp6
from cmden.imaging import (
    ImageGrid,
    bilinear_sample,
    bilinear_sample_adjoint,
    box_filter,
    box_filter_adjoint,
    forward_differences,
    forward_differences_adjoint,
    local_mean_var,
    pyramid_shapes,
    spatial_gradients,
    synthesize_view,
    upsample_adjoint,
    upsample_array,
    upsample_bilinear,
)
from cmden.imaging.resize import interpolation_matrix


def brute_force_view(source, depth, pose, camera):
    """Per-pixel reference for synthesize_view."""
    height, width = depth.shape
    data = source.data
    out = np.zeros_like(data)
    valid = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            ray = np.array([(x - camera.cx) / camera.fx, (y - camera.cy) / camera.fy, 1.0])
            point = pose.rotation @ (depth[y, x] * ray) + pose.translation
            if point[2] <= 1e-6:
                continue
            u = camera.fx * point[0] / point[2] + camera.cx
            v = camera.fy * point[1] / point[2] + camera.cy
            # Snap roundoff so lattice points on the border stay inside.
            u, v = (round(c) if abs(c - round(c)) < 1e-9 else c for c in (u, v))
            if not (0 <= u <= width - 1 and 0 <= v <= height - 1):
                continue
            x0 = min(math.floor(u), width - 2)
            y0 = min(math.floor(v), height - 2)
            wx, wy = u - x0, v - y0
            top = (1 - wx) * data[y0, x0] + wx * data[y0, x0 + 1]
            bottom = (1 - wx) * data[y0 + 1, x0] + wx * data[y0 + 1, x0 + 1]
            out[y, x] = (1 - wy) * top + wy * bottom
            valid[y, x] = True
    return out, valid


class TestImageGrid:
    """Tests for ImageGrid."""

    def test_single_channel_promoted(self):
        """Test that a 2D array becomes one channel."""
        grid = ImageGrid(np.zeros((3, 4)))
        assert grid.data.shape == (3, 4, 1)
        assert grid.channels == 1
        assert grid.to_array().shape == (3, 4)

    def test_read_only(self):
        """Test that the stored data cannot be modified."""
        grid = ImageGrid(np.zeros((2, 2, 3)))
        with pytest.raises(ValueError):
            grid.data[0, 0, 0] = 1.0

    def test_rejects_nan(self):
        """Test that non-finite data is refused."""
        with pytest.raises(InvalidInputError):
            ImageGrid(np.array([[np.nan, 0.0]]))

    def test_constant(self):
        """Test constant construction and unit-range check."""
        grid = ImageGrid.constant(2, 3, 0.5, channels=3)
        assert grid.shape == (2, 3)
        assert grid.is_unit_range


class TestBilinearSample:
    """Tests for bilinear sampling."""

    def test_cell_centre(self):
        """Test sampling the middle of a 2x2 image."""
        image = ImageGrid(np.array([[0.0, 1.0], [2.0, 3.0]]))
        view = bilinear_sample(image, np.array([[0.5]]), np.array([[0.5]]))
        assert view.image.data[0, 0, 0] == pytest.approx(1.5)
        assert view.validity[0, 0]

    def test_integer_coordinates_exact(self, textured_image):
        """Test that integer coordinates reproduce the image."""
        ys, xs = np.mgrid[0:12, 0:16].astype(np.float64)
        view = bilinear_sample(textured_image, xs, ys)
        np.testing.assert_allclose(view.image.data, textured_image.data, atol=1e-12)
        assert view.valid_fraction == 1.0

    def test_outside_is_invalid_zero(self):
        """Test that out-of-bounds samples are invalid and zero."""
        image = ImageGrid(np.ones((4, 4)))
        view = bilinear_sample(image, np.array([[-0.1, 3.5]]), np.array([[1.0, 1.0]]))
        assert not view.validity.any()
        assert np.all(view.image.data == 0.0)

    def test_right_border_reached(self):
        """Test that the last column is sampled with full weight."""
        image = ImageGrid(np.array([[0.0, 1.0, 5.0]]).repeat(2, axis=0))
        view = bilinear_sample(image, np.array([[2.0]]), np.array([[1.0]]))
        assert view.image.data[0, 0, 0] == pytest.approx(5.0)

    def test_adjoint_matches_difference(self, textured_image, rng):
        """Test coordinate gradients against central differences."""
        xs = rng.uniform(1.2, 13.8, (12, 16))
        ys = rng.uniform(1.2, 9.8, (12, 16))
        weights = rng.standard_normal(textured_image.data.shape)
        view = bilinear_sample(textured_image, xs, ys)
        grad_xs, _ = bilinear_sample_adjoint(textured_image, view, weights)

        h = 1e-6
        y, x = 4, 7
        bumped = xs.copy()
        bumped[y, x] += h
        lowered = xs.copy()
        lowered[y, x] -= h
        plus = np.sum(weights * bilinear_sample(textured_image, bumped, ys).image.data)
        minus = np.sum(weights * bilinear_sample(textured_image, lowered, ys).image.data)
        assert grad_xs[y, x] == pytest.approx((plus - minus) / (2 * h), rel=1e-5, abs=1e-8)


class TestSynthesizeView:
    """Tests for view synthesis."""

    def test_identity_pose(self, textured_image):
        """Test that the identity pose reproduces the source."""
        camera = CameraIntrinsics(fx=20.0, fy=20.0, cx=7.5, cy=5.5, width=16, height=12)
        view = synthesize_view(textured_image, np.full((12, 16), 3.0), PoseSE3.identity(), camera)
        np.testing.assert_allclose(view.image.data, textured_image.data, atol=1e-12)

    def test_shift_invalidates_border(self, textured_image):
        """Test that a lateral shift pushes the last columns outside."""
        camera = CameraIntrinsics(fx=20.0, fy=20.0, cx=7.5, cy=5.5, width=16, height=12)
        pose = exp6(np.array([0, 0, 0, 0.2, 0, 0]))
        view = synthesize_view(textured_image, np.full((12, 16), 2.0), pose, camera)
        # shift of fx * t / depth = 2 pixels
        assert not view.validity[:, -2:].any()
        assert view.validity[:, :-3].all()
        np.testing.assert_allclose(
            view.image.data[:, :-3], textured_image.data[:, 2:-1], atol=1e-9
        )

    def test_lateral_shift_matches_reference(self, rng):
        """Test an 8x8 sub-pixel shift against the per-pixel reference."""
        camera = CameraIntrinsics(fx=20.0, fy=20.0, cx=3.5, cy=3.5, width=8, height=8)
        source = ImageGrid(rng.uniform(0.0, 1.0, (8, 8, 3)))
        depth = np.full((8, 8), 2.0)
        pose = exp6(np.array([0, 0, 0, 0.125, 0, 0]))

        view = synthesize_view(source, depth, pose, camera)
        expected, valid = brute_force_view(source, depth, pose, camera)

        np.testing.assert_array_equal(view.validity, valid)
        np.testing.assert_allclose(view.image.data, expected, rtol=0, atol=1e-12)

    def test_general_motion_matches_reference(self, rng):
        """Test a 16x16 grid with rotation, translation and varying depth."""
        camera = CameraIntrinsics(fx=18.0, fy=18.0, cx=7.5, cy=7.5, width=16, height=16)
        source = ImageGrid(rng.uniform(0.0, 1.0, (16, 16, 3)))
        depth = rng.uniform(2.0, 5.0, (16, 16))
        pose = exp6(np.array([0.02, -0.01, 0.015, 0.1, -0.05, 0.03]))

        view = synthesize_view(source, depth, pose, camera)
        expected, valid = brute_force_view(source, depth, pose, camera)

        assert valid.mean() > 0.5
        np.testing.assert_array_equal(view.validity, valid)
        np.testing.assert_allclose(view.image.data, expected, rtol=0, atol=1e-12)


class TestResize:
    """Tests for align-corners upsampling."""

    def test_linear_ramp(self):
        """Test upsampling two samples to four."""
        out = upsample_array(np.array([[0.0, 1.0]]), 1, 4)
        np.testing.assert_allclose(out[0], [0.0, 1 / 3, 2 / 3, 1.0])

    def test_identity_size(self, textured_image):
        """Test that the same size is a copy."""
        out = upsample_bilinear(textured_image, 12, 16)
        np.testing.assert_allclose(out.data, textured_image.data)

    def test_rejects_shrinking(self):
        """Test that a smaller target raises."""
        with pytest.raises(InvalidInputError):
            upsample_array(np.zeros((4, 4)), 2, 4)

    def test_adjoint_is_transpose(self, rng):
        """Test <U x, y> == <x, U^T y>."""
        x = rng.standard_normal((3, 5))
        y = rng.standard_normal((6, 9))
        lhs = np.sum(upsample_array(x, 6, 9) * y)
        rhs = np.sum(x * upsample_adjoint(y, 3, 5))
        assert lhs == pytest.approx(rhs)

    def test_upsample_stays_in_range(self, rng):
        """Test that upsampled values are convex combinations of the input."""
        image = ImageGrid(rng.uniform(0.2, 0.7, (4, 5, 3)))
        out = upsample_bilinear(image, 9, 13).data

        assert out.min() >= image.data.min() - 1e-12
        assert out.max() <= image.data.max() + 1e-12
        weights = interpolation_matrix(5, 13).toarray()
        assert weights.min() >= 0.0
        np.testing.assert_allclose(weights.sum(axis=1), 1.0)

    def test_pyramid_shapes(self):
        """Test coarse-to-fine shapes with rounding up."""
        assert pyramid_shapes(48, 65, 3) == [(12, 17), (24, 33), (48, 65)]
        with pytest.raises(InvalidInputError):
            pyramid_shapes(4, 4, 0)


class TestFilters:
    """Tests for gradients and windowed statistics."""

    def test_local_statistics_centre(self):
        """Test mean and variance at the centre of a 3x3 ramp."""
        image = ImageGrid(np.arange(9, dtype=np.float64).reshape(3, 3))
        stats = local_mean_var(image, image, 3)
        assert stats.mu_a[1, 1, 0] == pytest.approx(4.0)
        assert stats.var_a[1, 1, 0] == pytest.approx(60.0 / 9.0)
        assert stats.cov_ab[1, 1, 0] == pytest.approx(60.0 / 9.0)

    def test_even_window_rejected(self, textured_image):
        """Test that an even window raises."""
        with pytest.raises(InvalidInputError):
            local_mean_var(textured_image, textured_image, 4)

    def test_box_filter_preserves_constant(self):
        """Test that a constant image is unchanged."""
        np.testing.assert_allclose(box_filter(np.full((5, 6), 2.0), 3), 2.0)

    def test_box_filter_adjoint(self, rng):
        """Test that the adjoint is the transpose."""
        x = rng.standard_normal((5, 7))
        y = rng.standard_normal((5, 7))
        assert np.sum(box_filter(x) * y) == pytest.approx(np.sum(x * box_filter_adjoint(y)))

    def test_spatial_gradients(self):
        """Test forward differences with a zero last column."""
        image = ImageGrid(np.array([[0.0, 1.0, 3.0], [0.0, 1.0, 3.0]]))
        dx, dy = spatial_gradients(image)
        np.testing.assert_allclose(dx.to_array()[0], [1.0, 2.0, 0.0])
        np.testing.assert_allclose(dy.to_array(), 0.0)

    def test_spatial_gradients_too_small(self):
        """Test that a single-row image raises."""
        with pytest.raises(InvalidInputError):
            spatial_gradients(ImageGrid(np.zeros((1, 5))))

    def test_spatial_gradients_transpose_symmetry(self, rng):
        """Test that the x gradient of the transpose is the transposed y gradient."""
        image = ImageGrid(rng.uniform(0.0, 1.0, (6, 9)))
        _, dy = spatial_gradients(image)
        dx_t, _ = spatial_gradients(ImageGrid(image.to_array().T))

        np.testing.assert_array_equal(dx_t.to_array(), dy.to_array().T)

    def test_forward_differences_adjoint(self, rng):
        """Test <D x, g> == <x, D^T g> for the difference operator."""
        x = rng.standard_normal((5, 7))
        gx = rng.standard_normal((5, 7))
        gy = rng.standard_normal((5, 7))
        dx, dy = forward_differences(x)

        lhs = np.sum(dx * gx) + np.sum(dy * gy)
        rhs = np.sum(x * forward_differences_adjoint(gx, gy))
        assert lhs == pytest.approx(rhs, rel=1e-12)
