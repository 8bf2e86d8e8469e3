"""Serializable description of a procedural scene.

A scene is a set of textured planes seen by a pinhole camera moving along
a path of ``camera_from_world`` poses. Textures are sums of sinusoids over
plane coordinates, so every pixel can be shaded from the exact hit point.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from cmden.geometry.camera import CameraIntrinsics
from cmden.geometry.depth import DEFAULT_MAX_DEPTH, DEFAULT_MIN_DEPTH
from cmden.geometry.pose import PoseSE3, exp6

logger = logging.getLogger(__name__)


class TextureComponent(BaseModel):
    """One sinusoid ``amplitude * sin(2 pi (fu u + fv v) + phase_c)``."""

    frequency: tuple[float, float] = Field(..., description="Cycles per scene unit along (u, v)")
    amplitude: float = Field(..., ge=0.0)
    phases: list[float] = Field(..., min_length=1, description="Phase per channel, radians")


class TextureSpec(BaseModel):
    """Base color plus sinusoid components; bounded to ``[0, 1]`` by construction."""

    base: list[float] = Field(default_factory=lambda: [0.5, 0.5, 0.5], min_length=1)
    components: list[TextureComponent] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_bounds(self) -> "TextureSpec":
        channels = len(self.base)
        for component in self.components:
            if len(component.phases) != channels:
                raise ValueError(
                    f"component has {len(component.phases)} phases for {channels} channels"
                )
        swing = sum(c.amplitude for c in self.components)
        if min(self.base) - swing < 0.0 or max(self.base) + swing > 1.0:
            raise ValueError(
                f"texture range [{min(self.base) - swing}, {max(self.base) + swing}] "
                "leaves [0, 1]"
            )
        return self

    @property
    def channels(self) -> int:
        return len(self.base)

    def evaluate(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Shade plane coordinates; returns ``u.shape + (channels,)``."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        out = np.broadcast_to(np.asarray(self.base), u.shape + (self.channels,)).copy()
        for c in self.components:
            wave = 2.0 * np.pi * (c.frequency[0] * u + c.frequency[1] * v)
            out += c.amplitude * np.sin(wave[..., None] + np.asarray(c.phases))
        return out

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        max_frequency: float,
        channels: int = 3,
        components: int = 6,
        contrast: float = 0.4,
    ) -> "TextureSpec":
        """Random band-limited texture.

        Args:
            rng: Source of randomness.
            max_frequency: Largest frequency in cycles per scene unit.
            channels: Number of color channels.
            components: Number of sinusoids.
            contrast: Sum of amplitudes around a 0.5 base.
        """
        weights = rng.uniform(0.5, 1.0, size=components)
        amplitudes = contrast * weights / weights.sum()
        parts = []
        for amplitude in amplitudes:
            angle = rng.uniform(0, np.pi)
            radius = rng.uniform(0.3, 1.0) * max_frequency
            parts.append(
                TextureComponent(
                    frequency=(float(radius * np.cos(angle)), float(radius * np.sin(angle))),
                    amplitude=float(amplitude),
                    phases=rng.uniform(0, 2 * np.pi, size=channels).tolist(),
                )
            )
        return cls(base=[0.5] * channels, components=parts)


class PlaneSpec(BaseModel):
    """Plane ``normal . X = offset`` in world coordinates.

    The normal is stored normalized; ``offset`` refers to the unit normal.

    ``extent`` bounds the plane in its own ``(u, v)`` coordinates as
    ``(u_min, u_max, v_min, v_max)``; ``None`` entries leave that side open.
    ``motion`` optionally lists a world translation of the whole plane for
    every frame.
    """

    normal: tuple[float, float, float]
    offset: float
    texture: TextureSpec
    extent: Optional[tuple[Optional[float], Optional[float], Optional[float], Optional[float]]] = None
    motion: Optional[list[tuple[float, float, float]]] = None

    @field_validator("normal")
    @classmethod
    def _unit_normal(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        norm = float(np.linalg.norm(value))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError(f"plane normal must be nonzero, got {value}")
        return (value[0] / norm, value[1] / norm, value[2] / norm)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(origin, e_u, e_v)`` of the plane's texture coordinates."""
        n = np.asarray(self.normal)
        helper = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e_u = np.cross(helper, n)
        e_u /= np.linalg.norm(e_u)
        e_v = np.cross(n, e_u)
        return n * self.offset, e_u, e_v

    def displacement(self, frame: int) -> np.ndarray:
        if not self.motion:
            return np.zeros(3)
        return np.asarray(self.motion[frame], dtype=np.float64)

    def is_static_between(self, i: int, j: int) -> bool:
        return bool(np.array_equal(self.displacement(i), self.displacement(j)))


class SceneSpec(BaseModel):
    """Planes, camera path and camera of a synthetic sequence."""

    planes: list[PlaneSpec] = Field(..., min_length=1)
    camera_path: list[list[float]] = Field(
        ..., min_length=1, description="camera_from_world pose params (omega, t) per frame"
    )
    fx: float = Field(..., gt=0)
    fy: float = Field(..., gt=0)
    cx: float
    cy: float
    width: int = Field(..., ge=2)
    height: int = Field(..., ge=2)
    channels: int = Field(default=3, ge=1)
    min_depth: float = Field(default=DEFAULT_MIN_DEPTH, gt=0)
    max_depth: float = Field(default=DEFAULT_MAX_DEPTH, gt=0)
    noise_std: float = Field(default=0.0, ge=0.0, description="Per-frame Gaussian sensor noise")
    seed: int = 0

    @model_validator(mode="after")
    def _check_consistency(self) -> "SceneSpec":
        for k, params in enumerate(self.camera_path):
            if len(params) != 6:
                raise ValueError(f"camera_path[{k}] has {len(params)} entries, expected 6")
        for k, plane in enumerate(self.planes):
            if plane.texture.channels != self.channels:
                raise ValueError(
                    f"plane {k} texture has {plane.texture.channels} channels, "
                    f"scene has {self.channels}"
                )
            if plane.motion is not None and len(plane.motion) != len(self.camera_path):
                raise ValueError(
                    f"plane {k} motion has {len(plane.motion)} entries "
                    f"for {len(self.camera_path)} frames"
                )
        if self.min_depth >= self.max_depth:
            raise ValueError(f"min_depth {self.min_depth} must be below max_depth {self.max_depth}")
        _ = self.intrinsics
        return self

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy, width=self.width, height=self.height
        )

    @property
    def frame_count(self) -> int:
        return len(self.camera_path)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def camera_pose(self, index: int) -> PoseSE3:
        """``camera_from_world`` pose of frame ``index``."""
        return exp6(np.asarray(self.camera_path[index]))

    def to_json(self, indent: Optional[int] = 2) -> str:
        return self.model_dump_json(indent=indent)

    @classmethod
    def from_json(cls, data: str) -> "SceneSpec":
        return cls.model_validate_json(data)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        logger.debug(f"Wrote scene spec to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SceneSpec":
        return cls.from_json(Path(path).read_text())
