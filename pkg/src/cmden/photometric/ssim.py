"""Structural similarity with a box window."""

from dataclasses import dataclass

import numpy as np

from cmden.errors import InvalidInputError
from cmden.imaging.filters import DEFAULT_WINDOW, box_filter, box_filter_adjoint, check_window
from cmden.imaging.grid import ImageGrid, check_same_shape

# Stabilizers for unit dynamic range: (0.01 * 1)^2 and (0.03 * 1)^2.
C1 = 0.01**2
C2 = 0.03**2


@dataclass
class SSIMForward:
    """Intermediates of one SSIM evaluation, kept for the adjoint."""

    a: np.ndarray
    b: np.ndarray
    mu_a: np.ndarray
    mu_b: np.ndarray
    num_mean: np.ndarray
    num_cov: np.ndarray
    den_mean: np.ndarray
    den_var: np.ndarray
    raw: np.ndarray
    value: np.ndarray
    window: int

    @property
    def clipped(self) -> np.ndarray:
        """Pixels where the raw index fell outside ``[-1, 1]``."""
        return (self.raw > 1.0) | (self.raw < -1.0)


def ssim_forward(a: np.ndarray, b: np.ndarray, window: int = DEFAULT_WINDOW) -> SSIMForward:
    """Per-pixel, per-channel SSIM of two ``(H, W, C)`` arrays."""
    check_window(window)
    if a.shape != b.shape:
        raise InvalidInputError(f"image shapes differ: {a.shape} vs {b.shape}")
    mu_a = box_filter(a, window)
    mu_b = box_filter(b, window)
    var_a = box_filter(a * a, window) - mu_a * mu_a
    var_b = box_filter(b * b, window) - mu_b * mu_b
    cov_ab = box_filter(a * b, window) - mu_a * mu_b

    num_mean = 2.0 * mu_a * mu_b + C1
    num_cov = 2.0 * cov_ab + C2
    den_mean = mu_a * mu_a + mu_b * mu_b + C1
    den_var = var_a + var_b + C2
    raw = (num_mean * num_cov) / (den_mean * den_var)
    return SSIMForward(
        a=a,
        b=b,
        mu_a=mu_a,
        mu_b=mu_b,
        num_mean=num_mean,
        num_cov=num_cov,
        den_mean=den_mean,
        den_var=den_var,
        raw=raw,
        value=np.clip(raw, -1.0, 1.0),
        window=window,
    )


def ssim_adjoint(forward: SSIMForward, grad: np.ndarray) -> np.ndarray:
    """Gradient with respect to ``b`` given the gradient on the clipped SSIM.

    The index depends on ``b`` through the window statistics ``mu_b``,
    ``E[b^2]`` and ``E[ab]``; their gradients are pulled back through the
    transposed box filter.
    """
    grad = np.where(forward.clipped, 0.0, grad)
    s = forward.raw
    den = forward.den_mean * forward.den_var
    g_num_mean = grad * forward.num_cov / den
    g_num_cov = grad * forward.num_mean / den
    g_den_mean = -grad * s / forward.den_mean
    g_den_var = -grad * s / forward.den_var

    mu_a, mu_b = forward.mu_a, forward.mu_b
    g_mu_b = (
        2.0 * mu_a * g_num_mean
        - 2.0 * mu_a * g_num_cov
        + 2.0 * mu_b * g_den_mean
        - 2.0 * mu_b * g_den_var
    )
    g_e_ab = 2.0 * g_num_cov
    g_e_bb = g_den_var

    w = forward.window
    return (
        box_filter_adjoint(g_mu_b, w)
        + 2.0 * forward.b * box_filter_adjoint(g_e_bb, w)
        + forward.a * box_filter_adjoint(g_e_ab, w)
    )


def ssim_map(a: ImageGrid, b: ImageGrid, window: int = DEFAULT_WINDOW) -> ImageGrid:
    """Per-pixel SSIM in ``[-1, 1]``, computed per channel.

    Raises:
        InvalidInputError: On shape mismatch.
    """
    check_same_shape(a, b)
    return ImageGrid(ssim_forward(a.data, b.data, window).value)
