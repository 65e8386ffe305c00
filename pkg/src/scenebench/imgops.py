"""Mask-agnostic pixel primitives shared by every scenario generator.

All operations are pure functions on 8-bit numpy images: they never mutate
their inputs, do their arithmetic in float64, and round exactly once before
returning.  Images are ``uint8`` arrays of shape (H, W, 3) or (H, W, 4),
masks are boolean arrays of shape (H, W).

Conventions pinned here so results are reproducible bit-for-bit:

* Gaussian kernels are truncated at ``radius = ceil(3 * sigma)`` and
  normalized to sum 1; borders are mirror-reflected without repeating the
  edge pixel (the reflect-101 style used by mainstream imaging libraries).
* Grayscale uses the video-luma weights 0.299 / 0.587 / 0.114.
* HSV is the standard hexcone model with hue in degrees [0, 360) and
  saturation/value in [0, 1].
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape {a.shape} != {b.shape}")


def _check_mask(img: np.ndarray, mask: np.ndarray) -> None:
    if mask.shape != img.shape[:2]:
        raise ValueError(
            f"mask shape {mask.shape} does not match image {img.shape[:2]}"
        )


def _to_uint8(data: np.ndarray) -> np.ndarray:
    """Round once, clamp to [0, 255], return uint8."""
    return np.clip(np.rint(data), 0, 255).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D normalized Gaussian weights w(k) ~ exp(-k^2 / (2 sigma^2)).

    k runs over [-radius, radius] with radius = ceil(3 * sigma).
    sigma = 0 yields the identity kernel [1.0].
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.array([1.0])
    radius = math.ceil(3 * sigma)
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(k ** 2) / (2 * sigma ** 2))
    return w / w.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with mirror-reflected borders.

    Both 1-D passes run in float64; rounding happens once at the end.
    sigma = 0 returns a copy.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    kernel = gaussian_kernel(sigma)
    data = img.astype(np.float64)
    data = correlate1d(data, kernel, axis=0, mode="mirror")
    data = correlate1d(data, kernel, axis=1, mode="mirror")
    return _to_uint8(data)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Replace every pixel (r, g, b) with (y, y, y), y = luma-weighted sum."""
    rgb = img[..., :3].astype(np.float64)
    y = _to_uint8(rgb @ np.asarray(GRAY_WEIGHTS))
    out = img.copy()
    out[..., :3] = y[..., None]
    return out


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """8-bit RGB -> hexcone HSV, h in degrees [0, 360), s and v in [0, 1].

    Gray pixels (chroma 0) get h = 0 by convention; black gets s = 0.
    Returns a float64 array of shape (..., 3).
    """
    rgb = img[..., :3].astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    c = mx - mn

    h = np.zeros_like(mx)
    nz = c != 0
    rmax = nz & (mx == r)
    gmax = nz & ~rmax & (mx == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = np.mod((g - b)[rmax] / c[rmax], 6.0)
    h[gmax] = (b - r)[gmax] / c[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / c[bmax] + 4.0
    h = np.mod(h * 60.0, 360.0)

    s = np.zeros_like(mx)
    vnz = mx != 0
    s[vnz] = c[vnz] / mx[vnz]
    return np.stack([h, s, mx], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse hexcone conversion back to 8-bit RGB."""
    h = np.mod(hsv[..., 0], 360.0) / 60.0
    s = hsv[..., 1]
    v = hsv[..., 2]
    c = v * s
    x = c * (1.0 - np.abs(np.mod(h, 2.0) - 1.0))
    m = v - c

    sector = np.floor(h).astype(int) % 6
    zeros = np.zeros_like(c)
    # r1, g1, b1 per sextant of the hue circle
    r1 = np.choose(sector, [c, x, zeros, zeros, x, c])
    g1 = np.choose(sector, [x, c, c, x, zeros, zeros])
    b1 = np.choose(sector, [zeros, zeros, x, c, c, x])
    rgb = np.stack([r1 + m, g1 + m, b1 + m], axis=-1)
    return _to_uint8(rgb * 255.0)


def shift_hue(img: np.ndarray, offset_degrees) -> np.ndarray:
    """Rotate hue by a constant or per-pixel offset (degrees), keep s and v.

    ``offset_degrees`` may be a scalar or an array broadcastable to (H, W).
    """
    hsv = rgb_to_hsv(img)
    hsv[..., 0] = np.mod(hsv[..., 0] + offset_degrees, 360.0)
    return hsv_to_rgb(hsv)


def linear_blend(
    a: np.ndarray, b: np.ndarray, alpha: float, beta: float, gamma: float = 0.0
) -> np.ndarray:
    """Per-sample ``clamp(round(alpha * a + beta * b + gamma))``."""
    _check_same_shape(a, b, "linear_blend")
    return _to_uint8(alpha * a.astype(np.float64) + beta * b.astype(np.float64) + gamma)


def unsharp_mask(img: np.ndarray, sigma: float, amount: float) -> np.ndarray:
    """Sharpen: ``clamp(round(img + amount * (img - blur(img, sigma))))``."""
    if sigma <= 0:
        raise ValueError(f"usm sigma must be > 0, got {sigma}")
    if amount < 0:
        raise ValueError(f"usm amount must be >= 0, got {amount}")
    if amount == 0:
        return img.copy()
    blurred = gaussian_blur(img, sigma).astype(np.float64)
    data = img.astype(np.float64)
    return _to_uint8(data + amount * (data - blurred))


def composite(fg: np.ndarray, mask: np.ndarray, bg: np.ndarray) -> np.ndarray:
    """Pick fg where mask is foreground, bg elsewhere."""
    _check_same_shape(fg, bg, "composite")
    _check_mask(fg, mask)
    return np.where(mask[..., None], fg, bg)
