"""Pinhole camera model."""

from dataclasses import dataclass

import numpy as np

from cmden.errors import InvalidInputError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixel units.

    Pixel centers sit at integer coordinates, so ``x`` ranges over
    ``[0, width - 1]`` and the homogeneous pixel is ``(x, y, 1)``.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        values = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in values):
            raise InvalidInputError(f"intrinsics must be finite, got {values}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )
        if self.width < 1 or self.height < 1:
            raise InvalidInputError(
                f"image size must be positive, got {self.width}x{self.height}"
            )
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInputError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    @property
    def matrix(self) -> np.ndarray:
        """The 3x3 matrix K."""
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def inverse(self) -> np.ndarray:
        """Closed-form inverse of K."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def scaled(self, width: int, height: int) -> "CameraIntrinsics":
        """Rescale the intrinsics to a different image resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=self.cx * sx,
            cy=self.cy * sy,
            width=width,
            height=height,
        )

    def to_dict(self) -> dict:
        """Convert to dictionary (for serialization)."""
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
        )


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixel-center coordinates as two ``(height, width)`` arrays."""
    ys, xs = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing="ij",
    )
    return xs, ys


def pixel_rays(intrinsics: CameraIntrinsics) -> np.ndarray:
    """Camera rays ``K^-1 (x, y, 1)`` for every pixel, shape ``(H, W, 3)``.

    The z component is exactly 1, so a ray scaled by depth is the 3D point.
    """
    xs, ys = pixel_grid(intrinsics.height, intrinsics.width)
    rays = np.empty(xs.shape + (3,))
    rays[..., 0] = (xs - intrinsics.cx) / intrinsics.fx
    rays[..., 1] = (ys - intrinsics.cy) / intrinsics.fy
    rays[..., 2] = 1.0
    return rays


def backproject(
    xs: np.ndarray, ys: np.ndarray, depth: np.ndarray, intrinsics: CameraIntrinsics
) -> np.ndarray:
    """Lift pixels with depth to camera-frame points of shape ``(..., 3)``."""
    xs, ys, depth = np.broadcast_arrays(
        np.asarray(xs, dtype=np.float64),
        np.asarray(ys, dtype=np.float64),
        np.asarray(depth, dtype=np.float64),
    )
    points = np.empty(xs.shape + (3,))
    points[..., 0] = (xs - intrinsics.cx) / intrinsics.fx * depth
    points[..., 1] = (ys - intrinsics.cy) / intrinsics.fy * depth
    points[..., 2] = depth
    return points


def project(points: np.ndarray, intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Perspective projection of camera-frame points to pixel coordinates."""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    xs = intrinsics.fx * points[..., 0] / z + intrinsics.cx
    ys = intrinsics.fy * points[..., 1] / z + intrinsics.cy
    return xs, ys
