"""Tests for PFM and PNG codecs, split files, frame triplets and export."""

import numpy as np
import pytest
from PIL import Image

from cmden.dataio import (
    FrameTriplet,
    SplitEntry,
    depth_preview,
    export_frames,
    kitti_intrinsics,
    read_depth_map,
    read_depth_png,
    read_frame,
    read_image,
    read_mask_pfm,
    read_pfm,
    read_split_file,
    write_depth_png,
    write_image,
    write_mask_pfm,
    write_pfm,
)
from cmden.errors import FormatError, InvalidInputError
from cmden.geometry import CameraIntrinsics
from cmden.imaging import ImageGrid
from cmden.synthscene import make_textured_plane_scene


class TestPFM:
    """Tests for portable float maps."""

    def test_single_pixel_layout(self, temp_directory):
        """Test the exact bytes of a 1x1 single-channel map."""
        path = write_pfm(temp_directory / "one.pfm", np.array([[3.5]], dtype=np.float32))
        raw = path.read_bytes()
        assert raw == b"Pf\n1 1\n-1.0\n" + np.array([3.5], dtype="<f4").tobytes()
        assert read_pfm(path)[0, 0] == 3.5

    def test_round_trip_rows_and_channels(self, temp_directory, rng):
        """Test that row order and channels survive a round trip."""
        data = rng.uniform(0, 10, (3, 5, 3)).astype(np.float32)
        out = read_pfm(write_pfm(temp_directory / "rgb.pfm", data))
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, data)

    def test_big_endian(self, temp_directory):
        """Test reading a positive-scale (big-endian) file."""
        path = temp_directory / "be.pfm"
        rows = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        path.write_bytes(b"Pf\n2 2\n1.0\n" + np.flipud(rows).astype(">f4").tobytes())
        np.testing.assert_array_equal(read_pfm(path), rows)

    def test_truncated_payload(self, temp_directory):
        """Test that a short payload raises."""
        path = temp_directory / "short.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 12)
        with pytest.raises(FormatError, match="payload has 12 bytes, expected 16"):
            read_pfm(path)

    def test_bad_magic(self, temp_directory):
        """Test that a non-PFM header raises."""
        path = temp_directory / "bad.pfm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(FormatError):
            read_pfm(path)

    def test_comment_line(self, temp_directory):
        """Test that a comment before the dimensions is skipped."""
        path = temp_directory / "comment.pfm"
        path.write_bytes(b"Pf\n# note\n1 1\n-1.0\n" + np.array([2.0], dtype="<f4").tobytes())
        assert read_pfm(path)[0, 0] == 2.0

    def test_non_finite_rejected(self, temp_directory):
        """Test that NaN cannot be written."""
        with pytest.raises(FormatError):
            write_pfm(temp_directory / "nan.pfm", np.array([[np.nan]]))

    def test_bad_shape(self, temp_directory):
        """Test that two channels are refused."""
        with pytest.raises(FormatError):
            write_pfm(temp_directory / "two.pfm", np.zeros((2, 2, 2)))

    def test_mask_round_trip(self, temp_directory):
        """Test boolean masks stored as 0/1 maps."""
        mask = np.array([[True, False], [False, True]])
        np.testing.assert_array_equal(read_mask_pfm(write_mask_pfm(temp_directory / "m.pfm", mask)), mask)
        write_pfm(temp_directory / "notmask.pfm", np.full((2, 2), 0.5))
        with pytest.raises(FormatError):
            read_mask_pfm(temp_directory / "notmask.pfm")


class TestDepthPNG:
    """Tests for 16-bit depth PNGs."""

    def test_scale(self, temp_directory):
        """Test that 10 m is stored as 2560."""
        path = write_depth_png(temp_directory / "d.png", np.array([[10.0, 0.0]]))
        stored = np.asarray(Image.open(path)).astype(np.int64)
        assert stored[0, 0] == 2560
        assert stored[0, 1] == 0

    def test_round_trip_precision(self, temp_directory, rng):
        """Test quantization error of at most half a unit."""
        depth = rng.uniform(0.5, 200.0, (6, 7))
        restored, valid = read_depth_png(write_depth_png(temp_directory / "d.png", depth))
        assert valid.all()
        assert np.abs(restored - depth).max() <= 1.0 / 512.0 + 1e-12

    def test_invalid_pixels(self, temp_directory):
        """Test that masked pixels read back invalid."""
        valid = np.array([[True, False]])
        _, restored = read_depth_png(
            write_depth_png(temp_directory / "d.png", np.full((1, 2), 4.0), valid)
        )
        np.testing.assert_array_equal(restored, valid)

    def test_eight_bit_rejected(self, temp_directory):
        """Test that an 8-bit PNG is not a depth map."""
        path = temp_directory / "rgb.png"
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path)
        with pytest.raises(FormatError):
            read_depth_png(path)

    def test_not_2d(self, temp_directory):
        """Test that a 3D depth array raises."""
        with pytest.raises(InvalidInputError):
            write_depth_png(temp_directory / "d.png", np.ones((2, 2, 3)))

    def test_read_depth_map_dispatch(self, temp_directory):
        """Test reading depth from both PFM and PNG."""
        depth = np.array([[2.0, 0.0]], dtype=np.float32)
        pfm_depth, pfm_valid = read_depth_map(write_pfm(temp_directory / "d.pfm", depth))
        png_depth, png_valid = read_depth_map(write_depth_png(temp_directory / "d.png", depth))
        np.testing.assert_array_equal(pfm_valid, [[True, False]])
        np.testing.assert_array_equal(png_valid, pfm_valid)
        assert png_depth[0, 0] == pfm_depth[0, 0] == 2.0


class TestImages:
    """Tests for 8-bit images and previews."""

    def test_round_trip(self, temp_directory, textured_image):
        """Test 8-bit quantization of a unit-range image."""
        restored = read_image(write_image(temp_directory / "i.png", textured_image))
        assert restored.shape == textured_image.shape
        assert np.abs(restored.data - textured_image.data).max() <= 0.5 / 255.0 + 1e-12

    def test_grey(self, temp_directory):
        """Test a single-channel image."""
        image = ImageGrid(np.array([[0.0, 1.0]]))
        restored = read_image(write_image(temp_directory / "g.png", image))
        assert restored.channels == 1
        np.testing.assert_allclose(restored.to_array(), [[0.0, 1.0]])

    def test_unreadable(self, temp_directory):
        """Test that garbage raises a format error."""
        path = temp_directory / "junk.png"
        path.write_bytes(b"not an image")
        with pytest.raises(FormatError):
            read_image(path)

    def test_preview(self):
        """Test the colour preview shape and type."""
        preview = depth_preview(np.array([[1.0, 2.0], [4.0, 8.0]]))
        assert preview.shape == (2, 2, 3)
        assert preview.dtype == np.uint8


class TestDatasetLayout:
    """Tests for split files, intrinsics and frame triplets."""

    def test_kitti_intrinsics(self):
        """Test mean focal length and centred principal point."""
        camera = kitti_intrinsics(1024, 320, [700.0, 720.0])
        assert camera.fx == camera.fy == 710.0
        assert (camera.cx, camera.cy) == (512.0, 160.0)

    def test_kitti_rescaled(self):
        """Test rescaling the focal length to a smaller width."""
        camera = kitti_intrinsics(512, 160, [700.0], source_width=1024)
        assert camera.fx == 350.0
        with pytest.raises(InvalidInputError):
            kitti_intrinsics(512, 160, [])

    def test_split_file(self, temp_directory):
        """Test parsing entries with comments and blank lines."""
        path = temp_directory / "split.txt"
        path.write_text("# header\n2011_09_26/drive_0001 5 l\n\nseq 12\n")
        entries = read_split_file(path)
        assert entries == [
            SplitEntry("2011_09_26/drive_0001", 5, "l"),
            SplitEntry("seq", 12, None),
        ]
        assert entries[0].image_path(temp_directory, 1).name == "0000000006.png"

    @pytest.mark.parametrize("line", ["only", "seq five", "seq 1 x", "a 1 l extra"])
    def test_split_file_errors(self, temp_directory, line):
        """Test malformed split lines."""
        path = temp_directory / "split.txt"
        path.write_text(line + "\n")
        with pytest.raises(FormatError):
            read_split_file(path)

    def test_triplet_load(self, temp_directory):
        """Test loading a target and two sources from a split entry."""
        camera = CameraIntrinsics(fx=4.0, fy=4.0, cx=2.0, cy=1.5, width=4, height=3)
        entry = SplitEntry("seq", 1, "r")
        for index in range(3):
            write_image(
                entry.image_path(temp_directory, index - 1),
                ImageGrid(np.full((3, 4, 3), index / 4.0)),
            )
        triplet = FrameTriplet.from_split_entry(temp_directory, entry, camera)
        assert triplet.offsets == [-1, 1]
        assert "image_03" in str(triplet.target)
        target, sources = triplet.load()
        assert target.shape == (3, 4)
        assert sources[1].data.mean() == pytest.approx(round(0.5 * 255) / 255)

    def test_triplet_size_mismatch(self, temp_directory):
        """Test that frames of the wrong size raise."""
        camera = CameraIntrinsics(fx=4.0, fy=4.0, cx=2.0, cy=2.0, width=4, height=4)
        for name in ("t.png", "s.png"):
            write_image(temp_directory / name, ImageGrid(np.zeros((3, 4))))
        triplet = FrameTriplet(temp_directory / "t.png", {1: temp_directory / "s.png"}, camera)
        with pytest.raises(FormatError):
            triplet.load()

    def test_triplet_validation(self, temp_directory, small_intrinsics):
        """Test that sources are required and offsets are nonzero."""
        with pytest.raises(InvalidInputError):
            FrameTriplet(temp_directory / "t.png", {}, small_intrinsics)
        with pytest.raises(InvalidInputError):
            FrameTriplet(temp_directory / "t.png", {0: temp_directory / "s.png"}, small_intrinsics)


class TestExport:
    """Tests for rendering a scene to disk."""

    def test_export_frames(self, temp_directory):
        """Test that every frame is written and reads back."""
        scene = make_textured_plane_scene(size=(8, 10), frames=2)
        manifest = export_frames(scene, temp_directory / "out")
        assert len(manifest.frames) == 2
        assert all(p.exists() for p in manifest.paths)
        image = read_frame(manifest.frames[0].image)
        assert image.shape == (8, 10)
        depth, valid = read_depth_map(manifest.frames[1].depth)
        assert valid.all()
        np.testing.assert_allclose(depth, 2.0, rtol=1e-6)
