"""Bounded inverse-depth parameterization ``D = 1 / (a * sigma + b)``."""

from dataclasses import dataclass

import numpy as np

from cmden.errors import InvalidInputError

DEFAULT_MIN_DEPTH = 0.1
DEFAULT_MAX_DEPTH = 100.0


def _check_bounds(min_depth: float, max_depth: float) -> None:
    if not (0 < min_depth < max_depth) or not np.isfinite(max_depth):
        raise InvalidInputError(
            f"depth bounds must satisfy 0 < min < max, got [{min_depth}, {max_depth}]"
        )


def depth_coefficients(
    min_depth: float = DEFAULT_MIN_DEPTH, max_depth: float = DEFAULT_MAX_DEPTH
) -> tuple[float, float]:
    """Return ``(a, b)`` so that sigma=1 maps to ``min_depth`` and sigma=0 to ``max_depth``."""
    _check_bounds(min_depth, max_depth)
    return 1.0 / min_depth - 1.0 / max_depth, 1.0 / max_depth


def _check_sigma(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if not np.all(np.isfinite(sigma)):
        raise InvalidInputError("sigma contains non-finite values")
    if sigma.size and (sigma.min() < 0.0 or sigma.max() > 1.0):
        raise InvalidInputError(
            f"sigma must lie in [0, 1], got range [{sigma.min()}, {sigma.max()}]"
        )
    return sigma


def sigma_to_inverse_depth(
    sigma: np.ndarray,
    min_depth: float = DEFAULT_MIN_DEPTH,
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> np.ndarray:
    """Inverse depth ``a * sigma + b``."""
    a, b = depth_coefficients(min_depth, max_depth)
    return a * _check_sigma(sigma) + b


def sigma_to_depth(
    sigma: np.ndarray,
    min_depth: float = DEFAULT_MIN_DEPTH,
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> np.ndarray:
    """Convert unit-interval parameters to metric depth.

    Args:
        sigma: Grid of values in ``[0, 1]``.
        min_depth: Depth reached at ``sigma == 1``.
        max_depth: Depth reached at ``sigma == 0``.

    Returns:
        Depth grid, monotonically decreasing in sigma.

    Raises:
        InvalidInputError: If sigma is non-finite or outside ``[0, 1]``.
    """
    return 1.0 / sigma_to_inverse_depth(sigma, min_depth, max_depth)


def sigma_to_depth_derivative(
    sigma: np.ndarray,
    min_depth: float = DEFAULT_MIN_DEPTH,
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> np.ndarray:
    """Elementwise ``dD/dsigma = -a * D**2``."""
    a, _ = depth_coefficients(min_depth, max_depth)
    depth = sigma_to_depth(sigma, min_depth, max_depth)
    return -a * depth**2


def depth_to_sigma(
    depth: np.ndarray,
    min_depth: float = DEFAULT_MIN_DEPTH,
    max_depth: float = DEFAULT_MAX_DEPTH,
) -> np.ndarray:
    """Inverse of :func:`sigma_to_depth`, clipped into ``[0, 1]``."""
    a, b = depth_coefficients(min_depth, max_depth)
    depth = np.asarray(depth, dtype=np.float64)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise InvalidInputError("depth must be finite and positive")
    return np.clip((1.0 / depth - b) / a, 0.0, 1.0)


@dataclass
class DepthField:
    """Per-pixel sigma parameters together with their depth bounds."""

    sigma: np.ndarray
    min_depth: float = DEFAULT_MIN_DEPTH
    max_depth: float = DEFAULT_MAX_DEPTH

    def __post_init__(self) -> None:
        _check_bounds(self.min_depth, self.max_depth)
        self.sigma = _check_sigma(self.sigma).copy()
        if self.sigma.ndim != 2:
            raise InvalidInputError(f"sigma must be a 2D grid, got shape {self.sigma.shape}")

    @classmethod
    def constant(
        cls,
        height: int,
        width: int,
        depth: float,
        min_depth: float = DEFAULT_MIN_DEPTH,
        max_depth: float = DEFAULT_MAX_DEPTH,
    ) -> "DepthField":
        sigma = depth_to_sigma(np.full((height, width), float(depth)), min_depth, max_depth)
        return cls(sigma=sigma, min_depth=min_depth, max_depth=max_depth)

    @classmethod
    def from_depth(
        cls,
        depth: np.ndarray,
        min_depth: float = DEFAULT_MIN_DEPTH,
        max_depth: float = DEFAULT_MAX_DEPTH,
    ) -> "DepthField":
        sigma = depth_to_sigma(depth, min_depth, max_depth)
        return cls(sigma=sigma, min_depth=min_depth, max_depth=max_depth)

    @property
    def shape(self) -> tuple[int, int]:
        return self.sigma.shape  # type: ignore[return-value]

    @property
    def coefficients(self) -> tuple[float, float]:
        return depth_coefficients(self.min_depth, self.max_depth)

    @property
    def depth(self) -> np.ndarray:
        return sigma_to_depth(self.sigma, self.min_depth, self.max_depth)
