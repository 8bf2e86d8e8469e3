"""Portable float map reading and writing.

Layout: a ``PF`` (three channels) or ``Pf`` (one channel) line, a
``width height`` line, a scale line whose sign gives the byte order
(negative means little-endian), then float32 rows stored bottom to top.
"""

import logging
import re
from pathlib import Path
from typing import Union

import numpy as np

from cmden.errors import FormatError

logger = logging.getLogger(__name__)

_DIMENSIONS = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def _read_line(handle, path: Path) -> bytes:
    line = handle.readline()
    if not line:
        raise FormatError(f"{path}: truncated PFM header")
    return line.rstrip(b"\r\n")


def read_pfm(path: Union[str, Path]) -> np.ndarray:
    """Read a PFM file into a float32 ``(H, W)`` or ``(H, W, 3)`` array.

    Raises:
        FormatError: On a malformed header, a payload of the wrong size
            or non-finite values.
    """
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_line(f, path).strip()
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise FormatError(f"{path}: not a PFM file (header {magic[:16]!r})")
        dims_line = _read_line(f, path)
        while dims_line.startswith(b"#"):
            dims_line = _read_line(f, path)
        match = _DIMENSIONS.match(dims_line)
        if match is None:
            raise FormatError(f"{path}: malformed dimensions line {dims_line[:32]!r}")
        width, height = int(match.group(1)), int(match.group(2))
        if width < 1 or height < 1:
            raise FormatError(f"{path}: empty image {width}x{height}")
        try:
            scale = float(_read_line(f, path))
        except ValueError as e:
            raise FormatError(f"{path}: malformed scale line") from e
        if scale == 0 or not np.isfinite(scale):
            raise FormatError(f"{path}: scale must be a nonzero finite number, got {scale}")
        payload = f.read()

    expected = width * height * channels * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected} "
            f"for {width}x{height}x{channels} float32"
        )
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    data = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: payload contains NaN or infinite values")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return np.flipud(data.reshape(shape)).copy()


def write_pfm(path: Union[str, Path], data: np.ndarray) -> Path:
    """Write a ``(H, W)``, ``(H, W, 1)`` or ``(H, W, 3)`` array as little-endian PFM.

    Raises:
        FormatError: On an unsupported shape or non-finite values.
    """
    path = Path(path)
    array = np.asarray(data)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[..., 0]
    if array.ndim == 2:
        magic = b"Pf"
    elif array.ndim == 3 and array.shape[2] == 3:
        magic = b"PF"
    else:
        raise FormatError(f"PFM holds 1 or 3 channels, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise FormatError(f"refusing to write non-finite values to {path}")
    height, width = array.shape[:2]
    payload = np.flipud(array).astype("<f4").tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{width} {height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(payload)
    logger.debug(f"Wrote {width}x{height} PFM to {path}")
    return path
