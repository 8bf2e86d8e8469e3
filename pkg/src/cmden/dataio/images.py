"""PNG/PPM images, 16-bit depth maps and depth previews."""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from matplotlib import colormaps
from PIL import Image, UnidentifiedImageError

from cmden.errors import FormatError, InvalidInputError
from cmden.imaging.grid import ImageGrid

logger = logging.getLogger(__name__)

DEPTH_PNG_SCALE = 256.0
DEPTH_PNG_MAX = 65535
PREVIEW_COLORMAP = "magma"
_SIXTEEN_BIT_MODES = ("I;16", "I;16B", "I;16L", "I")


def _open(path: Path) -> Image.Image:
    try:
        image = Image.open(path)
        image.load()
    except (UnidentifiedImageError, OSError) as e:
        raise FormatError(f"{path}: unreadable image ({e})") from e
    return image


def read_image(path: Union[str, Path]) -> ImageGrid:
    """Read an 8-bit PNG/PPM (grey or RGB) scaled to ``[0, 1]``."""
    path = Path(path)
    image = _open(path)
    if image.mode in ("L", "RGB"):
        data = np.asarray(image, dtype=np.float64) / 255.0
    elif image.mode in ("RGBA", "P", "LA"):
        data = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    else:
        raise FormatError(f"{path}: unsupported image mode {image.mode}")
    return ImageGrid(data)


def write_image(path: Union[str, Path], image: ImageGrid) -> Path:
    """Write an image in ``[0, 1]`` as 8-bit PNG (or PPM, from the suffix)."""
    path = Path(path)
    data = np.clip(np.rint(image.to_array() * 255.0), 0, 255).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path)
    logger.debug(f"Wrote image {path}")
    return path


def read_depth_png(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Read a 16-bit depth PNG as ``(depth, valid)``; stored 0 means no measurement.

    Raises:
        FormatError: If the file is not a single-channel 16-bit image.
    """
    path = Path(path)
    image = _open(path)
    if image.mode not in _SIXTEEN_BIT_MODES:
        raise FormatError(f"{path}: expected a 16-bit single-channel PNG, got mode {image.mode}")
    stored = np.asarray(image).astype(np.int64)
    if stored.min() < 0 or stored.max() > DEPTH_PNG_MAX:
        raise FormatError(f"{path}: values outside the 16-bit range")
    valid = stored > 0
    return stored.astype(np.float64) / DEPTH_PNG_SCALE, valid


def write_depth_png(
    path: Union[str, Path], depth: np.ndarray, valid: Union[np.ndarray, None] = None
) -> Path:
    """Store ``round(256 * depth)`` as 16-bit PNG; invalid pixels become 0.

    Valid depths are clipped to ``[1, 65535]`` stored units so they never
    read back as invalid.
    """
    path = Path(path)
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise InvalidInputError(f"depth map must be 2-D, got shape {depth.shape}")
    mask = np.isfinite(depth) & (depth > 0)
    if valid is not None:
        mask &= np.asarray(valid, dtype=bool)
    stored = np.clip(np.rint(np.where(mask, depth, 0.0) * DEPTH_PNG_SCALE), 1, DEPTH_PNG_MAX)
    stored = np.where(mask, stored, 0).astype(np.uint16)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(stored).save(path)
    logger.debug(f"Wrote 16-bit depth {path}")
    return path


def depth_preview(depth: np.ndarray) -> np.ndarray:
    """RGB uint8 rendering of inverse depth, normalized per image."""
    depth = np.asarray(depth, dtype=np.float64)
    inverse = np.where(np.isfinite(depth) & (depth > 0), 1.0 / np.maximum(depth, 1e-12), 0.0)
    lo, hi = float(inverse.min()), float(inverse.max())
    normalized = (inverse - lo) / (hi - lo) if hi > lo else np.zeros_like(inverse)
    rgba = colormaps[PREVIEW_COLORMAP](normalized)
    return (rgba[..., :3] * 255.0).round().astype(np.uint8)


def write_depth_preview(path: Union[str, Path], depth: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(depth_preview(depth)).save(path)
    logger.debug(f"Wrote depth preview {path}")
    return path
