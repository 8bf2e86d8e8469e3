"""Cascade configuration: depth intervals, frame offsets and optimizer settings."""

import logging
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cmden.errors import InvalidInputError
from cmden.optimization.adam import OptimizerConfig
from cmden.photometric.losses import Reduction

logger = logging.getLogger(__name__)

IntervalMode = Literal["absolute", "relative"]


class LayerSpec(BaseModel):
    """One cascade layer: a half-open depth interval and its source offsets."""

    interval: tuple[float, float] = Field(..., description="Half-open [alpha, beta)")
    frame_offsets: list[int] = Field(..., min_length=1, description="Signed source offsets")

    @field_validator("interval")
    @classmethod
    def _ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        alpha, beta = value
        if not 0.0 <= alpha < beta:
            raise ValueError(f"interval [{alpha}, {beta}) must satisfy 0 <= alpha < beta")
        return value

    @field_validator("frame_offsets")
    @classmethod
    def _nonzero(cls, value: list[int]) -> list[int]:
        if any(offset == 0 for offset in value):
            raise ValueError("frame offsets must be nonzero")
        return sorted(set(value))


def plan_frame_offsets(xi: int, n_layers: int) -> list[list[int]]:
    """Offsets ``[-xi**(i-1), +xi**(i-1)]`` for layers ``i = 1..n_layers``.

    Raises:
        InvalidInputError: If ``xi < 1`` or ``n_layers < 1``.
    """
    if xi < 1:
        raise InvalidInputError(f"xi must be an integer >= 1, got {xi}")
    if n_layers < 1:
        raise InvalidInputError(f"n_layers must be >= 1, got {n_layers}")
    return [[-(xi**i), xi**i] for i in range(n_layers)]


class CascadeConfig(BaseModel):
    """Everything :func:`cmden.cascade.run_cascade` needs besides the frames.

    ``layers`` are ordered nearest first and must tile ``[0, top)``
    without gaps or overlaps.
    """

    model_config = ConfigDict(populate_by_name=True)

    layers: list[LayerSpec] = Field(..., min_length=1)
    xi: int = Field(default=2, ge=1, description="Base frame-interval parameter")
    scales: int = Field(default=2, ge=1, description="Pyramid levels of the sigma field")
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    smoothness_weight: float = Field(default=1e-3, ge=0.0, alias="lambda")
    alpha: float = Field(default=0.85, ge=0.0, le=1.0, description="SSIM weight in pe")
    min_depth: float = Field(default=0.1, gt=0.0)
    max_depth: float = Field(default=100.0, gt=0.0)
    initial_depth: Optional[float] = Field(
        default=None,
        gt=0.0,
        description="Constant starting depth; geometric mean of bounds if unset",
    )
    reduction: Reduction = "min"
    freeze_pose: bool = True
    interval_mode: IntervalMode = "absolute"
    target_index: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_layers(self) -> "CascadeConfig":
        if self.min_depth >= self.max_depth:
            raise ValueError(f"min_depth {self.min_depth} must be below max_depth {self.max_depth}")
        if self.layers[0].interval[0] != 0.0:
            raise ValueError(f"first interval must start at 0, got {self.layers[0].interval[0]}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.interval[1] != nxt.interval[0]:
                raise ValueError(
                    f"intervals {list(prev.interval)} and {list(nxt.interval)} "
                    "must be contiguous and ordered"
                )
        if self.interval_mode == "relative" and self.layers[-1].interval[1] > 1.0:
            raise ValueError("relative interval bounds must not exceed 1.0")
        return self

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return [layer.interval for layer in self.layers]

    @property
    def top_bound(self) -> float:
        return self.layers[-1].interval[1]

    @property
    def start_depth(self) -> float:
        if self.initial_depth is not None:
            return self.initial_depth
        return float((self.min_depth * self.max_depth) ** 0.5)

    @classmethod
    def from_intervals(
        cls,
        bounds: Sequence[float],
        xi: int = 2,
        **kwargs: object,
    ) -> "CascadeConfig":
        """Build layers from interval edges and the ``xi`` offset rule.

        ``bounds`` ``(0, 30, 60, 80)`` gives three layers with offsets
        ``+-1``, ``+-xi`` and ``+-xi**2``.
        """
        edges = [float(b) for b in bounds]
        if len(edges) < 2:
            raise InvalidInputError(f"need at least two interval edges, got {edges}")
        offsets = plan_frame_offsets(xi, len(edges) - 1)
        layers = [
            LayerSpec(interval=(edges[k], edges[k + 1]), frame_offsets=offsets[k])
            for k in range(len(edges) - 1)
        ]
        return cls(layers=layers, xi=xi, **kwargs)  # type: ignore[arg-type]

    def to_json(self, indent: Optional[int] = 2) -> str:
        return self.model_dump_json(indent=indent, by_alias=True)

    @classmethod
    def from_json(cls, data: str) -> "CascadeConfig":
        return cls.model_validate_json(data)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        logger.debug(f"Wrote cascade config to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CascadeConfig":
        return cls.from_json(Path(path).read_text())
