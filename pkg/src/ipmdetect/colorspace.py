"""RGB to HSV conversion (hexcone model) and binary color-band filtering.

Hue is kept in degrees on [0, 360) as real numbers, saturation on [0, 1],
value on [0, 255] (V = max(R, G, B) exactly for integer inputs).  Hue is
computed as a single division of exact integers, ``(60*diff + offset*C) / C``,
so results are the correctly rounded values of the exact rational hue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HsvPixel:
    h: float  # degrees, [0, 360)
    s: float  # [0, 1]
    v: float  # [0, 255]


@dataclass(frozen=True)
class ColorBand:
    """Inclusive HSV bounds; h_lo > h_hi denotes wraparound through 0 degrees."""

    name: str
    h_lo: float
    h_hi: float
    s_lo: float
    s_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        if not (0 <= self.h_lo < 360 and 0 <= self.h_hi < 360):
            raise ValueError(f"band {self.name}: hue bounds must lie in [0, 360)")
        if not (0 <= self.s_lo <= self.s_hi <= 1):
            raise ValueError(f"band {self.name}: saturation bounds must satisfy 0 <= lo <= hi <= 1")
        if not (0 <= self.v_lo <= self.v_hi <= 255):
            raise ValueError(f"band {self.name}: value bounds must satisfy 0 <= lo <= hi <= 255")


@dataclass(frozen=True)
class ColorGain:
    """Per-channel affine correction c' = clamp(a*c + b, 0, 255)."""

    a: tuple[float, float, float] = (1.0, 1.0, 1.0)
    b: tuple[float, float, float] = (0.0, 0.0, 0.0)


def rgb_to_hsv(r: float, g: float, b: float) -> HsvPixel:
    """Convert one RGB pixel (channels on [0, 255]) to HSV."""
    v = max(r, g, b)
    c = v - min(r, g, b)
    if c == 0:
        return HsvPixel(0.0, 0.0, float(v))
    if v == r:
        num = 60 * (g - b)
        if num < 0:
            num += 360 * c
    elif v == g:
        num = 60 * (b - r) + 120 * c
    else:
        num = 60 * (r - g) + 240 * c
    return HsvPixel(num / c, c / v, float(v))


def rgb_image_to_hsv(img: np.ndarray) -> np.ndarray:
    """Vectorized conversion of an (H, W, 3) RGB image to float64 HSV planes.

    Matches rgb_to_hsv bit-for-bit on integer-valued inputs: the same fused
    integer expressions are evaluated per pixel.
    """
    rgb = np.asarray(img)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) image")
    if np.issubdtype(rgb.dtype, np.integer):
        rgb = rgb.astype(np.int32)  # 60*diff + 360*C stays well inside int32
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    v = np.maximum(np.maximum(r, g), b)
    c = v - np.minimum(np.minimum(r, g), b)

    num_r = 60 * (g - b)
    num_r = np.where(num_r < 0, num_r + 360 * c, num_r)
    num_g = 60 * (b - r) + 120 * c
    num_b = 60 * (r - g) + 240 * c
    # Priority must match the scalar branch order: v==r, then v==g, else b.
    num = np.where(v == r, num_r, np.where(v == g, num_g, num_b))

    chromatic = c > 0
    safe_c = np.where(chromatic, c, 1)
    h = np.where(chromatic, num / safe_c, 0.0)
    safe_v = np.where(v > 0, v, 1)
    s = np.where(chromatic, c / safe_v, 0.0)
    return np.stack([h, s, v.astype(np.float64)], axis=-1)


def apply_band_filter(hsv_img: np.ndarray, band: ColorBand) -> np.ndarray:
    """Boolean mask of pixels whose (h, s, v) fall inside the band."""
    h = hsv_img[:, :, 0]
    s = hsv_img[:, :, 1]
    v = hsv_img[:, :, 2]
    if band.h_lo <= band.h_hi:
        h_ok = (h >= band.h_lo) & (h <= band.h_hi)
    else:  # wraparound through 0 degrees
        h_ok = (h >= band.h_lo) | (h <= band.h_hi)
    return h_ok & (s >= band.s_lo) & (s <= band.s_hi) & (v >= band.v_lo) & (v <= band.v_hi)


def apply_color_gain(img: np.ndarray, gain: ColorGain) -> np.ndarray:
    """Apply the per-channel affine correction, clamped to [0, 255]."""
    rgb = np.asarray(img, dtype=np.float64)
    a = np.asarray(gain.a, dtype=np.float64)
    b = np.asarray(gain.b, dtype=np.float64)
    out = np.clip(rgb * a + b, 0.0, 255.0)
    if np.issubdtype(np.asarray(img).dtype, np.integer):
        return np.rint(out).astype(np.asarray(img).dtype)
    return out


# Calibration defaults; tune per corpus via the global config file.
DEFAULT_BANDS: dict[str, ColorBand] = {
    "yellow": ColorBand("yellow", h_lo=40.0, h_hi=70.0, s_lo=0.4, s_hi=1.0, v_lo=100.0, v_hi=255.0),
    "orange": ColorBand("orange", h_lo=10.0, h_hi=35.0, s_lo=0.4, s_hi=1.0, v_lo=100.0, v_hi=255.0),
    "white": ColorBand("white", h_lo=0.0, h_hi=359.999, s_lo=0.0, s_hi=0.25, v_lo=150.0, v_hi=255.0),
}
