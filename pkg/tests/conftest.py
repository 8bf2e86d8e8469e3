"""Pytest configuration and shared fixtures for cmden tests."""

import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest
from click.testing import CliRunner

from cmden.geometry.camera import CameraIntrinsics
from cmden.imaging.grid import ImageGrid
from cmden.synthscene import make_textured_plane_scene, render


@pytest.fixture
def temp_directory() -> Generator[Path, None, None]:
    """Create a temporary directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_intrinsics() -> CameraIntrinsics:
    """Return a 16x12 pinhole camera."""
    return CameraIntrinsics(fx=20.0, fy=20.0, cx=7.5, cy=5.5, width=16, height=12)


@pytest.fixture
def textured_image(rng: np.random.Generator) -> ImageGrid:
    """Return a smooth three-channel image in [0, 1]."""
    ys, xs = np.mgrid[0:12, 0:16].astype(np.float64)
    base = np.stack(
        [
            0.5 + 0.3 * np.sin(0.7 * xs + 0.4 * ys),
            0.5 + 0.3 * np.cos(0.5 * xs - 0.6 * ys),
            0.5 + 0.2 * np.sin(0.3 * xs * ys / 8.0),
        ],
        axis=-1,
    )
    return ImageGrid(np.clip(base + 0.01 * rng.standard_normal(base.shape), 0.0, 1.0))


@pytest.fixture
def plane_scene():
    """Return a two-frame textured plane at depth 2."""
    return make_textured_plane_scene(depth=2.0, baseline=0.05, size=(24, 32), frames=2)


@pytest.fixture
def plane_frames(plane_scene):
    """Return rendered ``(image, depth)`` pairs of the plane scene."""
    return [render(plane_scene, i) for i in range(plane_scene.frame_count)]


@pytest.fixture
def cli_runner() -> CliRunner:
    """Return a click test runner."""
    return CliRunner()


@pytest.fixture(autouse=True)
def reset_settings_cache(monkeypatch):
    """Drop cached settings and CMDEN_* variables between tests."""
    import cmden.config as config_module

    monkeypatch.setattr(config_module, "_settings", None)
    monkeypatch.setattr(config_module, "_settings_config_path", None)
    for name in ("CMDEN_THREADS", "CMDEN_OUTPUT_DIR", "CMDEN_VERBOSE", "CMDEN_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
