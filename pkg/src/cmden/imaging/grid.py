"""Image grids and sampled views."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from cmden.errors import InvalidInputError


@dataclass(eq=False)
class ImageGrid:
    """An ``(H, W, C)`` float64 grid.

    Images hold intensities in ``[0, 1]``; loss maps reuse the type without
    a range restriction. The array is copied on construction and marked
    read-only.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[..., None]
        if data.ndim != 3:
            raise InvalidInputError(f"image grid must be 2D or 3D, got shape {data.shape}")
        if min(data.shape) < 1:
            raise InvalidInputError(f"image grid dimensions must be positive, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("image grid contains non-finite values")
        data.setflags(write=False)
        self.data = data

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageGrid":
        return cls(data=array)

    @classmethod
    def constant(cls, height: int, width: int, value: float, channels: int = 1) -> "ImageGrid":
        return cls(data=np.full((height, width, channels), float(value)))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int]:
        """Spatial shape ``(H, W)``."""
        return (self.height, self.width)

    def is_unit_range(self) -> bool:
        return bool(self.data.min() >= 0.0 and self.data.max() <= 1.0)

    def to_array(self) -> np.ndarray:
        """Writable copy; single-channel grids come back as 2D arrays."""
        if self.channels == 1:
            return self.data[..., 0].copy()
        return self.data.copy()

    def transpose(self) -> "ImageGrid":
        return ImageGrid(self.data.transpose(1, 0, 2))


@dataclass(eq=False)
class SampledView:
    """A source image resampled onto the target grid.

    Pixels with ``validity == False`` hold 0 and are excluded from losses.
    """

    image: ImageGrid
    validity: np.ndarray
    xs: Optional[np.ndarray] = None
    ys: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.validity = np.asarray(self.validity, dtype=bool)
        if self.validity.shape != self.image.shape:
            raise InvalidInputError(
                f"validity shape {self.validity.shape} does not match image {self.image.shape}"
            )

    @property
    def valid_fraction(self) -> float:
        return float(self.validity.mean())


def as_grid(image: Union[ImageGrid, np.ndarray]) -> ImageGrid:
    """Accept either an :class:`ImageGrid` or a raw array."""
    if isinstance(image, ImageGrid):
        return image
    return ImageGrid(image)


def check_same_shape(a: ImageGrid, b: ImageGrid) -> None:
    if a.data.shape != b.data.shape:
        raise InvalidInputError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
