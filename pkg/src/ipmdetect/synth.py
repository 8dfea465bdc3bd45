"""Synthetic scene renderer and ground-truth oracle.

Builds a camera (and its pixel-to-ground homography) from explicit pinhole and
pose parameters, renders colored ground rectangles plus vertical billboard
obstacles, and emits the exact expected detections for a scene.

Rendering uses exact pixel coverage: every primitive is a convex polygon in
pixel space, interior pixels are filled outright and boundary pixels get the
analytic polygon/pixel-square intersection area as alpha.  This makes renders
deterministic and stable under resolution doubling, and it keeps sub-pixel
area measurements meaningful in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .colorspace import ColorGain, apply_color_gain
from .detection import DetectionConfig
from .geometry import CameraModel, GroundPoint

# Camera-frame depth (m) below which geometry is clipped away.
_Z_NEAR = 1e-4

DUCK_COLOR = (230, 200, 30)
CONE_COLOR = (240, 90, 20)
ROAD_COLOR = (45, 45, 45)
WHITE_LINE_COLOR = (240, 240, 240)
DASH_COLOR = (210, 180, 40)
STOP_LINE_COLOR = (235, 110, 30)


@dataclass(frozen=True)
class PinholeParams:
    """Pinhole intrinsics; f is the focal length in pixels."""

    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("focal length must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class CameraPose:
    """Camera height above ground and downward pitch; yaw about vertical."""

    height_m: float
    pitch_rad: float
    yaw_rad: float = 0.0

    def __post_init__(self):
        if self.height_m <= 0:
            raise ValueError("camera height must be positive")
        if not (0 < self.pitch_rad < math.pi / 2):
            raise ValueError("pitch must lie strictly in (0, pi/2)")


def _rotation_world_to_camera(pose: CameraPose) -> np.ndarray:
    """Rows are the camera right / down / forward axes in world coordinates."""
    cp, sp = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    cy, sy = math.cos(pose.yaw_rad), math.sin(pose.yaw_rad)
    forward = np.array([cy * cp, sy * cp, -sp])
    right = np.cross(forward, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


def _intrinsics(pp: PinholeParams) -> np.ndarray:
    return np.array([[pp.f, 0.0, pp.cx], [0.0, pp.f, pp.cy], [0.0, 0.0, 1.0]])


def make_camera(pp: PinholeParams, pose: CameraPose) -> CameraModel:
    """Exact pixel-to-ground homography induced by the pinhole camera.

    The camera center sits at (0, 0, height); the ground plane is z = 0 with
    x forward and y left, matching the package-wide ground frame.
    """
    K = _intrinsics(pp)
    R = _rotation_world_to_camera(pose)
    C = np.array([0.0, 0.0, pose.height_m])
    t = -R @ C
    ground_to_pixel = K @ np.column_stack([R[:, 0], R[:, 1], t])
    return CameraModel(np.linalg.inv(ground_to_pixel), pp.width, pp.height)


@dataclass(frozen=True)
class SynthCamera:
    """Pinhole + pose bundle with the derived homography camera model."""

    pinhole: PinholeParams
    pose: CameraPose
    model: CameraModel = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "model", make_camera(self.pinhole, self.pose))


def project_points(cam: SynthCamera, pts_world: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full pinhole projection of (N, 3) world points.

    Returns (N, 2) pixel coordinates and the (N,) camera-frame depths; points
    with non-positive depth are behind the camera and their pixels meaningless.
    """
    R = _rotation_world_to_camera(cam.pose)
    C = np.array([0.0, 0.0, cam.pose.height_m])
    pc = (np.asarray(pts_world, dtype=np.float64) - C) @ R.T
    z = pc[:, 2]
    safe = np.where(np.abs(z) < 1e-15, 1.0, z)
    K = _intrinsics(cam.pinhole)
    u = K[0, 0] * pc[:, 0] / safe + K[0, 2]
    v = K[1, 1] * pc[:, 1] / safe + K[1, 2]
    return np.stack([u, v], axis=1), z


@dataclass(frozen=True)
class GroundRect:
    """Colored rectangle painted on the ground plane (lane line, dash, stripe)."""

    center: tuple[float, float]  # (x, y) meters
    size: tuple[float, float]  # (along-x, along-y) meters before yaw
    color: tuple[int, int, int]
    yaw_rad: float = 0.0

    def corners(self) -> np.ndarray:
        hx, hy = self.size[0] / 2.0, self.size[1] / 2.0
        local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
        c, s = math.cos(self.yaw_rad), math.sin(self.yaw_rad)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center)


@dataclass(frozen=True)
class Billboard:
    """Vertical rectangular obstacle facing the camera."""

    kind: str  # "duck" or "cone"
    position: GroundPoint  # base center on the ground
    footprint_m: float
    height_m: float
    color: tuple[int, int, int] | None = None
    velocity: tuple[float, float] = (0.0, 0.0)  # meters per frame

    def __post_init__(self):
        if self.footprint_m <= 0 or self.height_m <= 0:
            raise ValueError("obstacles need positive footprint and height")

    def position_at(self, frame_index: int) -> GroundPoint:
        return GroundPoint(
            self.position.x + self.velocity[0] * frame_index,
            self.position.y + self.velocity[1] * frame_index,
        )

    def fill_color(self) -> tuple[int, int, int]:
        if self.color is not None:
            return self.color
        return DUCK_COLOR if self.kind == "duck" else CONE_COLOR


@dataclass(frozen=True)
class LaneGeometry:
    """Inner edges of the white lines bounding the drivable corridor."""

    y_min: float
    y_max: float

    def contains(self, y: float) -> bool:
        return self.y_min < y < self.y_max


@dataclass
class SceneSpec:
    """Declarative scene: ground markings, obstacles, and imaging nuisances."""

    ground_elements: list[GroundRect] = field(default_factory=list)
    obstacles: list[Billboard] = field(default_factory=list)
    ground_color: tuple[int, int, int] = ROAD_COLOR
    sky_color: tuple[int, int, int] = (0, 0, 0)
    ambient_gain: ColorGain | None = None
    noise_sigma: float = 0.0
    motion_blur_px: int = 0
    seed: int = 0
    lane: LaneGeometry | None = None


@dataclass(frozen=True)
class TruthObstacle:
    """Analytic expectation for one obstacle: base-center pose and lane flag."""

    x: float
    y: float
    radius: float
    in_lane: bool
    kind: str


def _clip_halfplane(pts: np.ndarray, signed: np.ndarray) -> np.ndarray:
    """One Sutherland-Hodgman pass; keeps the signed >= 0 side.

    Works for vertex arrays of any dimension; intersection vertices are
    interpolated linearly.
    """
    kept: list[np.ndarray] = []
    n = len(pts)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = pts[i], pts[j]
        si, sj = signed[i], signed[j]
        if si >= 0:
            kept.append(pi)
        if (si >= 0) != (sj >= 0):
            t = si / (si - sj)
            kept.append(pi + t * (pj - pi))
    return np.array(kept) if kept else np.empty((0, pts.shape[1]))


def _paint_convex(img: np.ndarray, poly: np.ndarray, color) -> None:
    """Alpha-composite a convex pixel-space polygon with exact edge coverage."""
    if len(poly) < 3:
        return
    # Drop consecutive duplicates; enforce positive shoelace orientation.
    keep = [0]
    for i in range(1, len(poly)):
        if not np.allclose(poly[i], poly[keep[-1]], atol=1e-12):
            keep.append(i)
    if len(keep) > 2 and np.allclose(poly[keep[-1]], poly[keep[0]], atol=1e-12):
        keep.pop()
    poly = poly[keep]
    if len(poly) < 3:
        return
    area2 = 0.0
    for i in range(len(poly)):
        j = (i + 1) % len(poly)
        area2 += poly[i, 0] * poly[j, 1] - poly[j, 0] * poly[i, 1]
    if area2 < 0:
        poly = poly[::-1]
    if abs(area2) < 1e-12:
        return

    h, w = img.shape[:2]
    u_lo = max(int(math.floor(poly[:, 0].min() - 0.5)), 0)
    u_hi = min(int(math.ceil(poly[:, 0].max() + 0.5)), w - 1)
    v_lo = max(int(math.floor(poly[:, 1].min() - 0.5)), 0)
    v_hi = min(int(math.ceil(poly[:, 1].max() + 0.5)), h - 1)
    if u_lo > u_hi or v_lo > v_hi:
        return

    uu, vv = np.meshgrid(
        np.arange(u_lo, u_hi + 1, dtype=np.float64),
        np.arange(v_lo, v_hi + 1, dtype=np.float64),
    )
    inside_margin = np.full(uu.shape, np.inf)
    outside = np.zeros(uu.shape, dtype=bool)
    for i in range(len(poly)):
        j = (i + 1) % len(poly)
        ex, ey = poly[j] - poly[i]
        norm = math.hypot(ex, ey)
        if norm < 1e-12:
            continue
        nx, ny = -ey / norm, ex / norm  # inward for positive orientation
        dist = nx * (uu - poly[i, 0]) + ny * (vv - poly[i, 1])
        support = (abs(nx) + abs(ny)) / 2.0  # pixel-square support radius
        inside_margin = np.minimum(inside_margin, dist - support)
        outside |= dist <= -support

    alpha = np.zeros(uu.shape)
    alpha[inside_margin >= 0] = 1.0
    boundary = ~outside & (inside_margin < 0)
    if np.any(boundary):
        bu = uu[boundary]
        bv = vv[boundary]
        boxes = shapely.box(bu - 0.5, bv - 0.5, bu + 0.5, bv + 0.5)
        shape = shapely.polygons(poly)
        alpha[boundary] = shapely.area(shapely.intersection(boxes, shape))

    tile = img[v_lo : v_hi + 1, u_lo : u_hi + 1]
    a = alpha[..., None]
    tile *= 1.0 - a
    tile += a * np.asarray(color, dtype=np.float64)


def _ground_visibility_clip(cam: SynthCamera, corners_xy: np.ndarray) -> np.ndarray:
    """Clip a ground polygon to the in-front-of-camera half-plane (2-D SH)."""
    fwd = _rotation_world_to_camera(cam.pose)[2]
    # Camera-frame depth of ground point (x, y, 0) is fwd . ((x, y, 0) - C).
    signed = (
        fwd[0] * corners_xy[:, 0]
        + fwd[1] * corners_xy[:, 1]
        + fwd[2] * (0.0 - cam.pose.height_m)
        - _Z_NEAR
    )
    return _clip_halfplane(corners_xy, signed)


def _paint_ground_polygon(img, cam: SynthCamera, corners_xy: np.ndarray, color) -> None:
    clipped = _ground_visibility_clip(cam, corners_xy)
    if len(clipped) < 3:
        return
    pts3 = np.column_stack([clipped, np.zeros(len(clipped))])
    uv, _ = project_points(cam, pts3)
    _paint_convex(img, uv, color)


def _paint_billboard(img, cam: SynthCamera, bb: Billboard, frame_index: int) -> None:
    pos = bb.position_at(frame_index)
    reach = math.hypot(pos.x, pos.y)
    if reach < 1e-9:
        lateral = np.array([0.0, 1.0])
    else:
        lateral = np.array([-pos.y / reach, pos.x / reach])
    half = lateral * (bb.footprint_m / 2.0)
    base = np.array([pos.x, pos.y])
    corners = np.array(
        [
            [*(base - half), 0.0],
            [*(base + half), 0.0],
            [*(base + half), bb.height_m],
            [*(base - half), bb.height_m],
        ]
    )
    R = _rotation_world_to_camera(cam.pose)
    C = np.array([0.0, 0.0, cam.pose.height_m])
    signed = (corners - C) @ R[2] - _Z_NEAR
    clipped = _clip_halfplane(corners, signed)
    if len(clipped) < 3:
        return
    uv, _ = project_points(cam, clipped)
    _paint_convex(img, uv, bb.fill_color())


def _horizon_ground_polygon(cam: SynthCamera) -> np.ndarray:
    """Image-rectangle polygon clipped to the below-horizon side, pixel coords."""
    pp = cam.pinhole
    rect = np.array(
        [
            [-0.5, -0.5],
            [pp.width - 0.5, -0.5],
            [pp.width - 0.5, pp.height - 0.5],
            [-0.5, pp.height - 0.5],
        ]
    )
    H = cam.model.H
    w_of = lambda p: H[2, 0] * p[0] + H[2, 1] * p[1] + H[2, 2]
    ref = w_of((pp.cx, pp.height - 1.0))
    sign = 1.0 if ref >= 0 else -1.0
    signed = np.array([sign * w_of(p) for p in rect]) - 1e-12
    return _clip_halfplane(rect, signed)


def render_scene(spec: SceneSpec, cam: SynthCamera, frame_index: int = 0) -> np.ndarray:
    """Rasterize the scene for one frame; deterministic for fixed inputs."""
    pp = cam.pinhole
    img = np.empty((pp.height, pp.width, 3), dtype=np.float64)
    img[:] = np.asarray(spec.sky_color, dtype=np.float64)

    ground_poly = _horizon_ground_polygon(cam)
    _paint_convex(img, ground_poly, spec.ground_color)

    for el in spec.ground_elements:
        _paint_ground_polygon(img, cam, el.corners(), el.color)

    def depth(bb: Billboard) -> float:
        p = bb.position_at(frame_index)
        return math.hypot(p.x, p.y)

    for bb in sorted(spec.obstacles, key=depth, reverse=True):
        _paint_billboard(img, cam, bb, frame_index)

    if spec.ambient_gain is not None:
        img = apply_color_gain(img, spec.ambient_gain)

    if spec.motion_blur_px and spec.motion_blur_px > 1:
        k = int(spec.motion_blur_px)
        kernel = np.ones(k) / k
        pad = k // 2
        padded = np.pad(img, ((0, 0), (pad, k - 1 - pad), (0, 0)), mode="edge")
        img = np.stack(
            [
                np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded[:, :, c])
                for c in range(3)
            ],
            axis=-1,
        )

    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed * 1_000_003 + frame_index)
        img = img + rng.normal(0.0, spec.noise_sigma, img.shape)

    return np.rint(np.clip(img, 0.0, 255.0)).astype(np.uint8)


def _is_whitish(color: tuple[int, int, int]) -> bool:
    from .colorspace import DEFAULT_BANDS, rgb_to_hsv

    band = DEFAULT_BANDS["white"]
    hsv = rgb_to_hsv(*color)
    return band.s_lo <= hsv.s <= band.s_hi and band.v_lo <= hsv.v <= band.v_hi


def _segment_hits_rect(p0: tuple[float, float], p1: tuple[float, float], rect: GroundRect) -> bool:
    """True when the segment p0 -> p1 intersects the rotated rectangle."""
    c, s = math.cos(rect.yaw_rad), math.sin(rect.yaw_rad)
    hx, hy = rect.size[0] / 2.0, rect.size[1] / 2.0

    def local(p):
        dx, dy = p[0] - rect.center[0], p[1] - rect.center[1]
        return (c * dx + s * dy, -s * dx + c * dy)

    (x0, y0), (x1, y1) = local(p0), local(p1)
    # Liang-Barsky clip of the parametric segment against |x| <= hx, |y| <= hy.
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-(x1 - x0), x0 + hx),
        (x1 - x0, hx - x0),
        (-(y1 - y0), y0 + hy),
        (y1 - y0, hy - y0),
    ):
        if abs(p) < 1e-15:
            if q < 0:
                return False
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return False
    return True


def scene_ground_truth(
    spec: SceneSpec,
    cfg: DetectionConfig,
    lane: LaneGeometry | None = None,
    frame_index: int = 0,
) -> list[TruthObstacle]:
    """Expected obstacle list for one frame, derived analytically.

    Obstacles ahead of the camera and within the detection crop distance are
    expected.  The in-lane flag mirrors the detector's white-line semantics:
    when a lane corridor is given (argument or spec), membership is lateral
    containment; otherwise an obstacle is out of lane exactly when some
    white-looking ground element crosses the straight robot-to-obstacle
    segment.
    """
    if lane is None:
        lane = spec.lane
    white_rects = None
    if lane is None:
        white_rects = [el for el in spec.ground_elements if _is_whitish(el.color)]
    expected = []
    for bb in spec.obstacles:
        pos = bb.position_at(frame_index)
        if pos.x <= 0 or pos.x > cfg.crop_distance:
            continue
        if lane is not None:
            in_lane = lane.contains(pos.y)
        else:
            in_lane = not any(
                _segment_hits_rect((0.0, 0.0), (pos.x, pos.y), rect) for rect in white_rects
            )
        expected.append(
            TruthObstacle(
                x=pos.x,
                y=pos.y,
                radius=bb.footprint_m / 2.0,
                in_lane=in_lane,
                kind=bb.kind,
            )
        )
    expected.sort(key=lambda t: t.x)
    return expected


def standard_road(
    length: float = 2.2,
    lane_half_width: float = 0.115,
    line_width: float = 0.048,
    dash_length: float = 0.04,
    dash_width: float = 0.02,
    dash_pitch: float = 0.25,
    stop_line_x: float | None = None,
) -> tuple[list[GroundRect], LaneGeometry]:
    """Two-lane road markings with the robot lane centered at y = 0.

    Right white line, dashed yellow separator on the left of the robot lane,
    far white line bounding the opposite lane.  Returns the markings plus the
    white-bounded corridor used for in-lane ground truth.
    """
    right_y = -(lane_half_width + line_width / 2.0)
    dash_y = lane_half_width + line_width / 2.0
    left_y = dash_y + 2 * lane_half_width + line_width
    elements = [
        GroundRect(center=(length / 2.0, right_y), size=(length, line_width), color=WHITE_LINE_COLOR),
        GroundRect(center=(length / 2.0, left_y), size=(length, line_width), color=WHITE_LINE_COLOR),
    ]
    x = dash_length / 2.0 + 0.05
    while x + dash_length / 2.0 < length:
        elements.append(
            GroundRect(center=(x, dash_y), size=(dash_length, dash_width), color=DASH_COLOR)
        )
        x += dash_pitch
    if stop_line_x is not None:
        elements.append(
            GroundRect(
                center=(stop_line_x, 0.0),
                size=(0.09, 2 * lane_half_width),
                color=STOP_LINE_COLOR,
            )
        )
    lane = LaneGeometry(y_min=right_y + line_width / 2.0, y_max=left_y - line_width / 2.0)
    return elements, lane
