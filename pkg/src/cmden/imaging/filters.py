"""Finite differences and windowed statistics."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from cmden.errors import InvalidInputError
from cmden.imaging.grid import ImageGrid, check_same_shape
from cmden.imaging.resize import apply_separable

DEFAULT_WINDOW = 3


def forward_differences(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences along x and y with a zero last column/row.

    Works for any positive size, including single-pixel dimensions.
    """
    dx = np.zeros_like(data, dtype=np.float64)
    dy = np.zeros_like(data, dtype=np.float64)
    dx[:, :-1] = data[:, 1:] - data[:, :-1]
    dy[:-1, :] = data[1:, :] - data[:-1, :]
    return dx, dy


def forward_differences_adjoint(grad_dx: np.ndarray, grad_dy: np.ndarray) -> np.ndarray:
    """Transpose of :func:`forward_differences` applied to ``(grad_dx, grad_dy)``."""
    grad_dx = np.asarray(grad_dx, dtype=np.float64)
    grad_dy = np.asarray(grad_dy, dtype=np.float64)
    out = np.zeros_like(grad_dx)
    out[:, 1:] += grad_dx[:, :-1]
    out[:, :-1] -= grad_dx[:, :-1]
    out[1:, :] += grad_dy[:-1, :]
    out[:-1, :] -= grad_dy[:-1, :]
    return out


def spatial_gradients(image: ImageGrid) -> tuple[ImageGrid, ImageGrid]:
    """Forward-difference image gradients, same shape as the input.

    Raises:
        InvalidInputError: If either spatial dimension is below 2.
    """
    if image.height < 2 or image.width < 2:
        raise InvalidInputError(
            f"spatial gradients need at least 2x2 pixels, got {image.height}x{image.width}"
        )
    dx, dy = forward_differences(image.data)
    return ImageGrid(dx), ImageGrid(dy)


def _mirror(index: int, size: int) -> int:
    if size == 1:
        return 0
    period = 2 * (size - 1)
    index %= period
    return index if index < size else period - index


@lru_cache(maxsize=64)
def box_matrix(size: int, window: int) -> sparse.csr_matrix:
    """Sparse 1D window-mean operator with reflection padding.

    Reflection mirrors about the border sample without repeating it
    (``c b | a b c``).
    """
    radius = window // 2
    rows, cols = [], []
    for i in range(size):
        for offset in range(-radius, radius + 1):
            rows.append(i)
            cols.append(_mirror(i + offset, size))
    vals = np.full(len(rows), 1.0 / window)
    return sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def check_window(window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise InvalidInputError(f"window must be odd and >= 1, got {window}")


def box_filter(data: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Window mean over ``window x window`` neighborhoods of a 2D/3D array."""
    check_window(window)
    h, w = data.shape[:2]
    return apply_separable(box_matrix(h, window), box_matrix(w, window), data)


def box_filter_adjoint(grad: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Transpose of :func:`box_filter`."""
    check_window(window)
    h, w = grad.shape[:2]
    return apply_separable(box_matrix(h, window).T.tocsr(), box_matrix(w, window).T.tocsr(), grad)


@dataclass
class LocalStatistics:
    """Per-pixel window statistics of two images, each ``(H, W, C)``."""

    mu_a: np.ndarray
    mu_b: np.ndarray
    var_a: np.ndarray
    var_b: np.ndarray
    cov_ab: np.ndarray


def local_statistics(a: np.ndarray, b: np.ndarray, window: int = DEFAULT_WINDOW) -> LocalStatistics:
    """Array form of :func:`local_mean_var`."""
    mu_a = box_filter(a, window)
    mu_b = box_filter(b, window)
    return LocalStatistics(
        mu_a=mu_a,
        mu_b=mu_b,
        var_a=box_filter(a * a, window) - mu_a * mu_a,
        var_b=box_filter(b * b, window) - mu_b * mu_b,
        cov_ab=box_filter(a * b, window) - mu_a * mu_b,
    )


def local_mean_var(a: ImageGrid, b: ImageGrid, window: int = DEFAULT_WINDOW) -> LocalStatistics:
    """Box-filter means, population variances and covariance of two images.

    Raises:
        InvalidInputError: On shape mismatch or an even/non-positive window.
    """
    check_same_shape(a, b)
    check_window(window)
    return local_statistics(a.data, b.data, window)
