"""Tests for cascade configuration, sight masks, fusion and the pipeline."""

import numpy as np
import pytest

from cmden.cascade import (
    CascadeConfig,
    LayerSpec,
    SightMask,
    dilate_mask,
    fuse_depth,
    generate_sight_masks,
    plan_frame_offsets,
    resolve_intervals,
    run_cascade,
)
from cmden.cascade.pipeline import _CascadeRun, resolve_offsets
from cmden.errors import InvalidInputError
from cmden.optimization import OptimizationState, OptimizerConfig, loss_and_gradients
from cmden.synthscene import make_three_band_scene, render


@pytest.fixture
def band_sequence():
    """A small rendered three-band sequence with its scene."""
    scene = make_three_band_scene(
        [(0.0, 30.0), (30.0, 60.0), (60.0, 80.0)], size=(16, 24), frames=9, seed=2
    )
    frames = [render(scene, i)[0] for i in range(scene.frame_count)]
    poses = [scene.camera_pose(i) for i in range(scene.frame_count)]
    return scene, frames, poses


class TestFrameOffsets:
    """Tests for the frame-interval rule."""

    def test_powers_of_xi(self):
        """Test offsets for xi 2 and three layers."""
        assert plan_frame_offsets(2, 3) == [[-1, 1], [-2, 2], [-4, 4]]

    def test_xi_one(self):
        """Test that xi 1 keeps adjacent frames for every layer."""
        assert plan_frame_offsets(1, 3) == [[-1, 1]] * 3

    def test_invalid(self):
        """Test invalid parameters."""
        with pytest.raises(InvalidInputError):
            plan_frame_offsets(0, 3)
        with pytest.raises(InvalidInputError):
            plan_frame_offsets(2, 0)


class TestCascadeConfig:
    """Tests for CascadeConfig."""

    def test_from_intervals(self):
        """Test building layers from interval edges."""
        config = CascadeConfig.from_intervals([0, 30, 60, 80], xi=3)
        assert config.intervals == [(0.0, 30.0), (30.0, 60.0), (60.0, 80.0)]
        assert [layer.frame_offsets for layer in config.layers] == [[-1, 1], [-3, 3], [-9, 9]]
        assert config.top_bound == 80.0

    def test_rejects_gap(self):
        """Test that non-contiguous intervals are refused."""
        with pytest.raises(ValueError):
            CascadeConfig(
                layers=[
                    LayerSpec(interval=(0, 10), frame_offsets=[-1, 1]),
                    LayerSpec(interval=(20, 30), frame_offsets=[-2, 2]),
                ]
            )

    def test_rejects_zero_offset(self):
        """Test that a zero frame offset is refused."""
        with pytest.raises(ValueError):
            LayerSpec(interval=(0, 10), frame_offsets=[0, 1])

    def test_lambda_alias(self):
        """Test that the smoothness weight accepts its short alias."""
        config = CascadeConfig.from_intervals([0, 10], **{"lambda": 0.05})
        assert config.smoothness_weight == 0.05

    def test_start_depth(self):
        """Test the default starting depth is the geometric mean of the bounds."""
        config = CascadeConfig.from_intervals([0, 10], min_depth=1.0, max_depth=100.0)
        assert config.start_depth == pytest.approx(10.0)

    def test_json_round_trip(self, temp_directory):
        """Test saving and loading."""
        config = CascadeConfig.from_intervals(
            [0, 5, 50], optimizer=OptimizerConfig(max_iterations=7), freeze_pose=False
        )
        path = config.save(temp_directory / "config.json")
        loaded = CascadeConfig.load(path)
        assert loaded.intervals == config.intervals
        assert loaded.optimizer.max_iterations == 7
        assert loaded.freeze_pose is False


class TestSightMasks:
    """Tests for sight-distance mask generation."""

    def test_partition(self):
        """Test that tiling intervals partition the covered pixels."""
        depth = np.array([[1.0, 29.9, 30.0], [59.0, 60.0, 79.0]])
        masks = generate_sight_masks(depth, [(0, 30), (30, 60), (60, 80)])
        counts = np.sum([m.mask for m in masks], axis=0)
        np.testing.assert_array_equal(counts, 1)
        np.testing.assert_array_equal(masks[1].mask, [[False, False, True], [True, False, False]])

    def test_beyond_top_uncovered(self):
        """Test that depth at the top bound belongs to no mask."""
        masks = generate_sight_masks(np.array([[80.0, 5.0]]), [(0, 80)])
        np.testing.assert_array_equal(masks[0].mask, [[False, True]])
        assert masks[0].coverage == 0.5

    def test_empty_mask(self):
        """Test that an interval no pixel falls in yields an empty mask."""
        masks = generate_sight_masks(np.full((2, 2), 5.0), [(0, 10), (10, 20)])
        assert masks[1].is_empty

    @pytest.mark.parametrize(
        "intervals",
        [[(10, 5)], [(0, 10), (5, 20)], [(-1, 5)], []],
    )
    def test_invalid_intervals(self, intervals):
        """Test inverted, overlapping, negative and missing intervals."""
        with pytest.raises(InvalidInputError):
            generate_sight_masks(np.ones((2, 2)), intervals)

    def test_relative_intervals(self):
        """Test resolving fractions against the rough maximum."""
        rough = np.array([[10.0, 40.0]])
        resolved = resolve_intervals([(0.0, 0.5), (0.5, 1.0)], rough)
        assert resolved[0] == (0.0, 20.0)
        masks = generate_sight_masks(rough, resolved)
        assert masks[1].mask[0, 1]

    def test_dilate(self):
        """Test one-pixel dilation."""
        mask = np.zeros((5, 5), bool)
        mask[2, 2] = True
        assert dilate_mask(mask).sum() == 9


class TestFusion:
    """Tests for mask-weighted fusion."""

    def test_select_per_mask(self):
        """Test that each pixel takes its own layer's depth."""
        masks = [
            SightMask(mask=np.array([[True, False]]), alpha=0, beta=1),
            SightMask(mask=np.array([[False, True]]), alpha=1, beta=2),
        ]
        fused = fuse_depth(masks, [np.full((1, 2), 3.0), np.full((1, 2), 7.0)])
        np.testing.assert_array_equal(fused, [[3.0, 7.0]])

    def test_uncovered_takes_last_layer(self):
        """Test the backfill of pixels outside every mask."""
        masks = [SightMask(mask=np.array([[True, False]]), alpha=0, beta=1)]
        fused = fuse_depth(masks, [np.array([[2.0, 9.0]])])
        np.testing.assert_array_equal(fused, [[2.0, 9.0]])

    def test_overlap_rejected(self):
        """Test that overlapping masks raise."""
        masks = [
            SightMask(mask=np.ones((1, 2), bool), alpha=0, beta=1),
            SightMask(mask=np.array([[False, True]]), alpha=1, beta=2),
        ]
        with pytest.raises(InvalidInputError, match="overlap at 1 pixels"):
            fuse_depth(masks, [np.ones((1, 2)), np.ones((1, 2))])

    def test_misaligned(self):
        """Test mismatched list lengths."""
        with pytest.raises(InvalidInputError):
            fuse_depth([SightMask(np.ones((1, 1), bool), 0, 1)], [])


class TestResolveOffsets:
    """Tests for offset clamping at the sequence ends."""

    def test_clamped(self):
        """Test that a far offset is clamped to the last frame."""
        warnings: list[str] = []
        assert resolve_offsets([-4, 4], 2, 5, warnings) == [-2, 2]
        assert len(warnings) == 2

    def test_dropped(self):
        """Test that offsets with no frame on their side are dropped."""
        warnings: list[str] = []
        assert resolve_offsets([-1, 1], 0, 3, warnings) == [1]
        assert "dropped" in warnings[0]


class TestRunCascade:
    """Tests for the full cascade on a small synthetic sequence."""

    def test_outputs(self, band_sequence):
        """Test shapes, masks and fusion consistency."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 30, 60, 80],
            min_depth=10.0,
            max_depth=100.0,
            optimizer=OptimizerConfig(max_iterations=4),
        )
        result = run_cascade(frames, scene.intrinsics, config, poses=poses, threads=2)

        assert result.fused_depth.shape == (16, 24)
        assert len(result.layer_depths) == 3
        assert len(result.masks) == 3
        assert result.report.target_index == 4
        for mask, depth in zip(result.masks, result.layer_depths):
            np.testing.assert_array_equal(result.fused_depth[mask.mask], depth[mask.mask])
        assert np.all(result.fused_depth >= 10.0) and np.all(result.fused_depth <= 100.0)
        report = result.report.to_dict()
        assert report["frame_count"] == 9
        assert len(report["layers"]) == 3

    def test_layer_offsets_follow_xi(self, band_sequence):
        """Test that each layer uses its own frame interval."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 30, 60, 80], min_depth=10.0, max_depth=100.0,
            optimizer=OptimizerConfig(max_iterations=2),
        )
        result = run_cascade(frames, scene.intrinsics, config, poses=poses)
        assert [layer.requested_offsets for layer in result.report.layers] == [
            [-1, 1], [-2, 2], [-4, 4]
        ]
        assert result.report.rough.offsets == [-1, 1]

    def test_short_sequence_warns(self, band_sequence):
        """Test that too few frames for the widest offset clamp with a warning."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 30, 60, 80], min_depth=10.0, max_depth=100.0,
            optimizer=OptimizerConfig(max_iterations=1),
        )
        result = run_cascade(frames[2:7], scene.intrinsics, config, poses=poses[2:7])
        assert result.report.warnings
        assert result.report.layers[2].offsets == [-2, 2]

    def test_static_frames_degenerate(self, band_sequence):
        """Test that identical frames are flagged as degenerate."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 80], min_depth=10.0, max_depth=100.0, optimizer=OptimizerConfig(max_iterations=1)
        )
        static = [frames[4]] * 3
        result = run_cascade(static, scene.intrinsics, config, poses=[poses[4]] * 3)
        assert result.report.degenerate
        assert result.report.auto_mask_coverage == 0.0

    def test_too_few_frames(self, band_sequence):
        """Test that a single frame raises."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals([0, 80], min_depth=10.0, max_depth=100.0)
        with pytest.raises(InvalidInputError):
            run_cascade(frames[:1], scene.intrinsics, config, poses=poses[:1])

    def test_frozen_pose_needs_poses(self, band_sequence):
        """Test that frozen poses require a pose list."""
        scene, frames, _ = band_sequence
        config = CascadeConfig.from_intervals([0, 80], min_depth=10.0, max_depth=100.0)
        with pytest.raises(InvalidInputError):
            run_cascade(frames, scene.intrinsics, config)

    def test_joint_pose_without_poses(self, band_sequence):
        """Test that free poses start from the identity when none are given."""
        scene, frames, _ = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 30, 80], min_depth=10.0, max_depth=100.0, freeze_pose=False,
            optimizer=OptimizerConfig(max_iterations=2),
        )
        result = run_cascade(frames, scene.intrinsics, config)
        assert set(result.rough_poses) == {-1, 1}
        assert result.fused_depth.shape == (16, 24)

    def test_threaded_runs_identical(self, band_sequence):
        """Test that threaded reruns are bit-identical to each other and to a serial run."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 30, 60, 80], min_depth=10.0, max_depth=100.0,
            optimizer=OptimizerConfig(max_iterations=3),
        )

        first = run_cascade(frames, scene.intrinsics, config, poses=poses, threads=3)
        second = run_cascade(frames, scene.intrinsics, config, poses=poses, threads=3)
        serial = run_cascade(frames, scene.intrinsics, config, poses=poses, threads=1)

        for other in (second, serial):
            np.testing.assert_array_equal(other.fused_depth, first.fused_depth)
            for a, b in zip(other.layer_depths, first.layer_depths):
                np.testing.assert_array_equal(a, b)


class TestLayerObjective:
    """Tests for the masked stage-2 objective."""

    def test_gradient_zero_outside_dilated_mask(self, band_sequence):
        """Test that sigma outside the dilated sight mask gets no gradient."""
        scene, frames, poses = band_sequence
        config = CascadeConfig.from_intervals(
            [0, 30, 60, 80], min_depth=10.0, max_depth=100.0, scales=1
        )
        run = _CascadeRun(frames, scene.intrinsics, config, poses, target_index=4)
        rough = render(scene, 4)[1]
        mask = generate_sight_masks(rough, [(0.0, 30.0), (30.0, 60.0), (60.0, 80.0)])[1]
        offsets = [-2, 2]

        inputs = run.layer_inputs(offsets, mask)
        state = OptimizationState.from_poses(
            run.initial_sigmas(), [run.known_pose(o) for o in offsets]
        )
        _, gradients = loss_and_gradients(state, inputs)

        grad = gradients.sigma[-1]
        outside = ~dilate_mask(mask.mask)
        assert outside.any()
        assert np.all(grad[outside] == 0.0)
        assert np.any(grad[mask.mask] != 0.0)
