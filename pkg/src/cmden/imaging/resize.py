"""Align-corners bilinear upsampling as sparse linear operators."""

from functools import lru_cache

import numpy as np
from scipy import sparse

from cmden.errors import InvalidInputError
from cmden.imaging.grid import ImageGrid


@lru_cache(maxsize=64)
def interpolation_matrix(source_size: int, target_size: int) -> sparse.csr_matrix:
    """1D align-corners interpolation from ``source_size`` to ``target_size`` samples.

    Output sample ``i`` sits at source position ``i * (n - 1) / (m - 1)``.
    """
    if source_size < 1 or target_size < 1:
        raise InvalidInputError(f"sizes must be positive, got {source_size} -> {target_size}")
    if target_size == 1 or source_size == 1:
        positions = np.zeros(target_size)
    else:
        positions = np.arange(target_size) * (source_size - 1) / (target_size - 1)
    lower = np.clip(np.floor(positions), 0, max(source_size - 2, 0)).astype(np.intp)
    upper = np.minimum(lower + 1, source_size - 1)
    frac = np.where(upper > lower, positions - lower, 0.0)

    rows = np.concatenate([np.arange(target_size), np.arange(target_size)])
    cols = np.concatenate([lower, upper])
    vals = np.concatenate([1.0 - frac, frac])
    keep = vals != 0.0
    matrix = sparse.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(target_size, source_size)
    )
    return matrix.tocsr()


def apply_separable(
    row_operator: sparse.spmatrix, col_operator: sparse.spmatrix, data: np.ndarray
) -> np.ndarray:
    """Compute ``row_operator @ X @ col_operator.T`` for each channel of ``data``.

    Accepts ``(H, W)`` or ``(H, W, C)`` arrays and returns the same rank.
    """
    flat = data.ndim == 2
    array = data[..., None] if flat else data
    h, w, c = array.shape
    new_h = row_operator.shape[0]
    new_w = col_operator.shape[0]
    tmp = row_operator @ array.reshape(h, w * c)
    tmp = tmp.reshape(new_h, w, c).transpose(1, 0, 2).reshape(w, new_h * c)
    out = col_operator @ tmp
    out = np.ascontiguousarray(out.reshape(new_w, new_h, c).transpose(1, 0, 2))
    return out[..., 0] if flat else out


def upsample_array(data: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Array form of :func:`upsample_bilinear`."""
    h, w = data.shape[:2]
    if target_h < h or target_w < w:
        raise InvalidInputError(
            f"upsampling cannot shrink {h}x{w} to {target_h}x{target_w}"
        )
    if (target_h, target_w) == (h, w):
        return np.array(data, dtype=np.float64)
    return apply_separable(
        interpolation_matrix(h, target_h), interpolation_matrix(w, target_w), data
    )


def upsample_adjoint(grad: np.ndarray, source_h: int, source_w: int) -> np.ndarray:
    """Transpose of :func:`upsample_array` applied to an output gradient."""
    target_h, target_w = grad.shape[:2]
    if (target_h, target_w) == (source_h, source_w):
        return np.array(grad, dtype=np.float64)
    return apply_separable(
        interpolation_matrix(source_h, target_h).T.tocsr(),
        interpolation_matrix(source_w, target_w).T.tocsr(),
        grad,
    )


def upsample_bilinear(image: ImageGrid, target_h: int, target_w: int) -> ImageGrid:
    """Enlarge an image with align-corners bilinear interpolation.

    Raises:
        InvalidInputError: If a target dimension is smaller than the source.
    """
    return ImageGrid(upsample_array(image.data, target_h, target_w))


def pyramid_shapes(height: int, width: int, levels: int) -> list[tuple[int, int]]:
    """Grid shapes for ``levels`` scales ordered coarse to fine.

    Each coarser level halves the previous one (rounding up); the last
    entry is the full resolution.
    """
    if levels < 1:
        raise InvalidInputError(f"levels must be >= 1, got {levels}")
    shapes = []
    for level in range(levels - 1, -1, -1):
        factor = 2**level
        shapes.append((max(1, -(-height // factor)), max(1, -(-width // factor))))
    return shapes
