"""Calibrated ground-plane camera geometry and the bird's-eye warp.

Conventions used throughout the package:

* Ground frame: metric, origin at the camera's ground point, ``x`` forward
  along the robot axis, ``y`` to the left (meters).
* Pixel frame: ``u`` is the column (right), ``v`` the row (down); sub-pixel
  values are allowed everywhere.
* ``CameraModel.H`` maps homogeneous *pixel* coordinates to homogeneous
  *ground* coordinates.  Going from ground to pixel therefore uses ``H^-1``.
* Bird-view rasters put far ground (large ``x``) at row 0 and left ground
  (large ``y``) at column 0, so the robot sits just below the bottom edge
  looking up the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection, HorizonNotInFrame

# Homogeneous third components smaller than this are treated as at/above the
# horizon.  CameraModel normalizes H so the threshold is meaningful.
W_EPS = 1e-9


@dataclass(frozen=True)
class GroundPoint:
    """Point on the ground plane, meters, x forward / y left."""

    x: float
    y: float


@dataclass(frozen=True)
class PixelCoord:
    """Sub-pixel image location, u = column, v = row."""

    u: float
    v: float


class CameraModel:
    """Calibrated pixel-to-ground homography plus image dimensions.

    ``H`` is stored normalized (divided by its largest-magnitude entry) so the
    degenerate-projection threshold on the homogeneous third component is
    scale-independent.  Normalization does not change the projective map.

    The homogeneous sign of the bottom-center pixel fixes which side of the
    horizon is "in front of the camera"; projections whose sign flips relative
    to it are viewing rays that never meet the ground ahead.
    """

    def __init__(self, H, width: int, height: int):
        H = np.asarray(H, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(H)):
            raise ValueError("homography contains non-finite entries")
        if abs(np.linalg.det(H)) <= 1e-12:
            raise ValueError("homography is singular (|det H| <= 1e-12)")
        if width < 1 or height < 1:
            raise ValueError("image dimensions must be at least 1x1")
        self.H = H / np.abs(H).max()
        self.H_inv = np.linalg.inv(self.H)
        self.width = int(width)
        self.height = int(height)
        _, _, w_ref = _apply_homography(self.H, (width - 1) / 2.0, height - 1.0)
        self.front_sign = math.copysign(1.0, w_ref) if abs(w_ref) >= W_EPS else 1.0
        # For any in-front ground point, (H^-1 g)_3 equals 1/w of its pixel,
        # so the reference sign is shared by both directions.
        self.front_sign_inv = self.front_sign

    def __repr__(self) -> str:
        return f"CameraModel({self.width}x{self.height})"


def _apply_homography(M: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Apply 3x3 M to stacked (u, v, 1); returns (x, y, w) without dividing."""
    x = M[0, 0] * u + M[0, 1] * v + M[0, 2]
    y = M[1, 0] * u + M[1, 1] * v + M[1, 2]
    w = M[2, 0] * u + M[2, 1] * v + M[2, 2]
    return x, y, w


def pixel_to_ground(cam: CameraModel, p: PixelCoord) -> GroundPoint:
    """Project a pixel onto the ground plane (inverse perspective mapping).

    Raises DegenerateProjection for pixels at or above the horizon (their
    viewing ray never meets the ground ahead of the camera).
    """
    x, y, w = _apply_homography(cam.H, p.u, p.v)
    if abs(w) < W_EPS or w * cam.front_sign < 0:
        raise DegenerateProjection(f"pixel ({p.u}, {p.v}) maps to/above the horizon")
    return GroundPoint(x / w, y / w)


def ground_to_pixel(cam: CameraModel, g: GroundPoint) -> PixelCoord:
    """Project a ground point into the image; exact inverse of pixel_to_ground."""
    u, v, w = _apply_homography(cam.H_inv, g.x, g.y)
    if abs(w) < W_EPS or w * cam.front_sign_inv < 0:
        raise DegenerateProjection(f"ground point ({g.x}, {g.y}) projects degenerately")
    return PixelCoord(u / w, v / w)


def _centerline_ground_x(cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Ground x for every row at the vertical centerline, plus a validity mask.

    Rows at/above the horizon (|w| tiny) or mapping behind the camera are
    invalid.  The in-front side is the homogeneous sign at the bottom row.
    """
    rows = np.arange(cam.height, dtype=np.float64)
    u = np.full(cam.height, (cam.width - 1) / 2.0)
    x, _, w = _apply_homography(cam.H, u, rows)
    ref_sign = math.copysign(1.0, w[-1]) if abs(w[-1]) >= W_EPS else 1.0
    valid = (np.abs(w) >= W_EPS) & (w * ref_sign > 0)
    gx = np.full(cam.height, np.inf)
    np.divide(x, w, out=gx, where=valid)
    return gx, valid


def crop_row_for_distance(cam: CameraModel, max_dist: float) -> int:
    """Smallest row v such that every centerline pixel at rows >= v lies
    within ``max_dist`` meters of ground distance.

    Raises HorizonNotInFrame when not even the bottom row is within range.
    """
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    gx, valid = _centerline_ground_x(cam)
    within = valid & (gx <= max_dist)
    if not within[-1]:
        raise HorizonNotInFrame(f"no image row maps within {max_dist} m")
    crop = 0
    for v in range(cam.height - 1, -1, -1):
        if not within[v]:
            crop = v + 1
            break
    return min(max(crop, 0), cam.height - 1)


@dataclass(frozen=True)
class BirdviewMapping:
    """Perspective transform from cropped-image pixels to a metric top-down raster.

    ``M`` maps cropped-image pixels (row 0 = crop row of the source image) to
    bird-view pixels.  ``scale`` is isotropic pixels-per-meter; ``origin`` is
    the ground point seen at bird-view pixel (0, out_height - 1).
    """

    M: np.ndarray
    M_inv: np.ndarray
    out_width: int
    out_height: int
    scale: float
    origin: GroundPoint

    def __post_init__(self):
        if self.out_width <= 0 or self.out_height <= 0 or self.scale <= 0:
            raise ValueError("bird-view raster must have positive size and scale")


def birdview_to_ground(m: BirdviewMapping, p: PixelCoord) -> GroundPoint:
    """Affine map from a bird-view pixel to its ground point (never degenerate)."""
    x = m.origin.x + ((m.out_height - 1) - p.v) / m.scale
    y = m.origin.y - p.u / m.scale
    return GroundPoint(x, y)


def ground_to_birdview(m: BirdviewMapping, g: GroundPoint) -> PixelCoord:
    """Inverse of birdview_to_ground; result may fall outside the raster."""
    v = (m.out_height - 1) - (g.x - m.origin.x) * m.scale
    u = (m.origin.y - g.y) * m.scale
    return PixelCoord(u, v)


def compute_birdview_transform(
    cam: CameraModel, crop_row: int, out_width: int = 640
) -> BirdviewMapping:
    """Build the bird's-eye mapping for the image cropped at ``crop_row``.

    The four corners of the cropped image are projected to the ground; the
    ground quadrilateral is scaled isotropically so its lateral span equals
    ``out_width`` pixels, and the output height follows from the same scale.
    """
    if not (0 <= crop_row <= cam.height - 2):
        raise ValueError(f"crop_row {crop_row} outside [0, {cam.height - 2}]")
    corners_u = np.array([0.0, cam.width - 1.0, cam.width - 1.0, 0.0])
    corners_v = np.array([float(crop_row), float(crop_row), cam.height - 1.0, cam.height - 1.0])
    x, y, w = _apply_homography(cam.H, corners_u, corners_v)
    if np.any(np.abs(w) < W_EPS) or not (np.all(w > 0) or np.all(w < 0)):
        raise DegenerateProjection("a cropped-image corner maps to/above the horizon")
    gx, gy = x / w, y / w
    width_m = gy.max() - gy.min()
    length_m = gx.max() - gx.min()
    if width_m <= 0 or length_m <= 0:
        raise DegenerateProjection("cropped image has no ground extent")
    scale = out_width / width_m
    out_height = max(int(math.ceil(length_m * scale)), 1)
    # Ground -> bird-view pixel: u = (y_max - y) * scale, v = (x_max - x) * scale.
    A = np.array(
        [
            [0.0, -scale, scale * gy.max()],
            [-scale, 0.0, scale * gx.max()],
            [0.0, 0.0, 1.0],
        ]
    )
    T = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, float(crop_row)], [0.0, 0.0, 1.0]])
    M = A @ cam.H @ T
    M /= np.abs(M).max()
    origin = GroundPoint(gx.max() - (out_height - 1) / scale, gy.max())
    return BirdviewMapping(
        M=M,
        M_inv=np.linalg.inv(M),
        out_width=int(out_width),
        out_height=out_height,
        scale=scale,
        origin=origin,
    )


def _source_sample_grid(m: BirdviewMapping) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source coordinates (sx, sy) and validity for every output pixel.

    Depends only on the mapping, so the grids are computed once and cached on
    the (immutable) mapping instance.
    """
    cached = getattr(m, "_sample_grid", None)
    if cached is not None:
        return cached
    uu, vv = np.meshgrid(
        np.arange(m.out_width, dtype=np.float64),
        np.arange(m.out_height, dtype=np.float64),
    )
    sx, sy, sw = _apply_homography(m.M_inv, uu, vv)
    valid = np.abs(sw) > 1e-12
    safe_w = np.where(valid, sw, 1.0)
    grids = (sx / safe_w, sy / safe_w, valid)
    object.__setattr__(m, "_sample_grid", grids)
    return grids


def warp_to_birdview(img: np.ndarray, m: BirdviewMapping, method: str = "bilinear") -> np.ndarray:
    """Warp the cropped camera image into the bird-view raster.

    Every output pixel is sampled at M^-1 (u, v); samples outside the source
    are black.  ``method`` is "bilinear" (default) or "nearest".
    """
    img = np.asarray(img)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    src_h, src_w = img.shape[:2]
    sx, sy, valid = _source_sample_grid(m)

    if method == "nearest":
        xi = np.rint(sx).astype(np.int64)
        yi = np.rint(sy).astype(np.int64)
        inside = valid & (xi >= 0) & (xi < src_w) & (yi >= 0) & (yi < src_h)
        xi = np.clip(xi, 0, src_w - 1)
        yi = np.clip(yi, 0, src_h - 1)
        out = np.zeros((m.out_height, m.out_width, img.shape[2]), dtype=img.dtype)
        out[inside] = img[yi[inside], xi[inside]]
        return out[:, :, 0] if squeeze else out
    if method != "bilinear":
        raise ValueError(f"unknown interpolation method: {method!r}")

    inside = valid & (sx >= 0) & (sx <= src_w - 1) & (sy >= 0) & (sy <= src_h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, src_w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0).astype(np.float32)[..., None]
    fy = np.clip(sy - y0, 0.0, 1.0).astype(np.float32)[..., None]
    flat = img.reshape(-1, img.shape[2]).astype(np.float32)
    i00 = (y0 * src_w + x0).ravel()
    i01 = (y0 * src_w + x1).ravel()
    i10 = (y1 * src_w + x0).ravel()
    i11 = (y1 * src_w + x1).ravel()
    shape = (m.out_height, m.out_width, img.shape[2])
    top = flat[i00].reshape(shape) * (1 - fx) + flat[i01].reshape(shape) * fx
    bottom = flat[i10].reshape(shape) * (1 - fx) + flat[i11].reshape(shape) * fx
    blend = top * (1 - fy) + bottom * fy
    blend[~inside] = 0
    if np.issubdtype(img.dtype, np.integer):
        blend = np.rint(blend)
    result = blend.astype(img.dtype)
    return result[:, :, 0] if squeeze else result
