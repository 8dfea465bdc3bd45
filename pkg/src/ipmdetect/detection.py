"""Turn labeled bird-view regions into confirmed, localized obstacles.

Pipeline per frame: optional color gain, distance crop, bird's-eye warp, HSV
band masks, connected-component labeling, eigenvalue classification per color,
multi-frame confirmation tracking for yellow candidates, ground pose plus
radius recovery, and the white-line in-lane check.

Thresholds that carry pixel units (the minimum region size and the eigenvalue
cuts) are calibrated at ``reference_scale`` pixels per meter and rescaled by
the actual bird-view scale inside the pipeline, so one config works across
differently calibrated cameras.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import colorspace
from .colorspace import ColorBand, ColorGain
from .errors import NonMonotonicFrame
from .geometry import (
    BirdviewMapping,
    CameraModel,
    GroundPoint,
    PixelCoord,
    birdview_to_ground,
    compute_birdview_transform,
    crop_row_for_distance,
    ground_to_birdview,
    warp_to_birdview,
)
from .segmentation import Region, all_region_properties, label_components

RATIO_EPS = 1e-6

CLASS_CONE = "cone"
CLASS_STOP_LINE = "rejected_stop_line"
CLASS_STRONG = "strong"
CLASS_WEAK = "weak"
CLASS_REJECTED = "rejected"


@dataclass
class DetectionConfig:
    """Detector thresholds; eigenvalues are area-normalized pixels^2.

    cone_ratio_threshold ships calibrated as the geometric mean of cone and
    stop-line ratio statistics measured on the synthetic corpus.
    """

    min_pixels_base: int = 40
    ev_accept: float = 20.0
    ev_fast_track: float = 100.0
    size_change_max: float = 0.5
    confirm_frames: int = 3
    cone_ratio_threshold: float = 14.8
    track_gate: float = 0.1
    crop_distance: float = 1.7
    reference_scale: float = 200.0
    white_run_min: int = 3

    def __post_init__(self):
        if min(
            self.min_pixels_base,
            self.ev_accept,
            self.ev_fast_track,
            self.confirm_frames,
            self.cone_ratio_threshold,
            self.track_gate,
            self.crop_distance,
            self.reference_scale,
            self.white_run_min,
        ) <= 0:
            raise ValueError("detection thresholds must be positive")
        if not (0 < self.size_change_max <= 1):
            raise ValueError("size_change_max must lie in (0, 1]")
        if self.confirm_frames < 1:
            raise ValueError("confirm_frames must be at least 1")


@dataclass(frozen=True)
class Candidate:
    """Region that passed per-frame classification, with its ground pose."""

    region: Region
    ground_pos: GroundPoint
    radius: float
    frame: int


@dataclass
class Track:
    id: int
    last_pos: GroundPoint
    last_lambda1: float
    hits: int
    last_frame: int


@dataclass
class TrackerState:
    """Single-stream tracker; frames must be fed in strictly increasing order."""

    tracks: dict[int, Track] = field(default_factory=dict)
    next_id: int = 1
    last_frame: int | None = None


@dataclass(frozen=True)
class Obstacle:
    """Confirmed obstacle in the robot frame (camera at origin, x forward)."""

    x: float
    y: float
    radius: float
    in_lane: bool
    quad: tuple[PixelCoord, PixelCoord, PixelCoord, PixelCoord]
    color_class: str

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")


def min_pixel_threshold(cfg: DetectionConfig, m: BirdviewMapping) -> int:
    """Minimum region pixel count, scaled quadratically with the raster scale."""
    scaled = cfg.min_pixels_base * (m.scale / cfg.reference_scale) ** 2
    return max(int(math.ceil(scaled)), 1)


def scale_adjusted(cfg: DetectionConfig, m: BirdviewMapping) -> DetectionConfig:
    """Config with the pixel^2 eigenvalue cuts rescaled to this raster's scale.

    Keeps the thresholds metric: a blob passing ev_accept at the reference
    scale passes it on any other calibration of the same scene.
    """
    k2 = (m.scale / cfg.reference_scale) ** 2
    return replace(cfg, ev_accept=cfg.ev_accept * k2, ev_fast_track=cfg.ev_fast_track * k2)


def eigenvalue_ratio(region: Region) -> float:
    """Elongation statistic (lambda1 + eps) / (lambda2 + eps); high for smears."""
    return (region.lambda1 + RATIO_EPS) / (region.lambda2 + RATIO_EPS)


def classify_orange(region: Region, cfg: DetectionConfig) -> str:
    """Cone when the eigenvalue ratio exceeds the calibrated threshold.

    Off-plane cones smear into long blobs in the bird view, driving the ratio
    far above anything a painted stop-line stripe produces.
    """
    if eigenvalue_ratio(region) > cfg.cone_ratio_threshold:
        return CLASS_CONE
    return CLASS_STOP_LINE


def classify_yellow(region: Region, cfg: DetectionConfig) -> str:
    """Reject small blobs, fast-track large ones; comparisons are strict."""
    if not (region.lambda1 > cfg.ev_accept):
        return CLASS_REJECTED
    if region.lambda1 > cfg.ev_fast_track:
        return CLASS_STRONG
    return CLASS_WEAK


def track_update(
    tracker: TrackerState, cands: list[Candidate], frame: int, cfg: DetectionConfig
) -> list[Candidate]:
    """Associate candidates with tracks and return the confirmed ones.

    Nearest-neighbor association in ground distance within cfg.track_gate.
    A stable strong candidate confirms on its second consecutive frame; weak
    candidates, or ones whose lambda1 jumped by more than size_change_max,
    need cfg.confirm_frames consecutive frames.  Tracks missing one frame die.
    """
    if tracker.last_frame is not None and frame <= tracker.last_frame:
        raise NonMonotonicFrame(f"frame {frame} after {tracker.last_frame}")

    alive = {tid: t for tid, t in tracker.tracks.items() if t.last_frame == frame - 1}

    pairs = []
    for ci, cand in enumerate(cands):
        for tid, track in alive.items():
            d = math.hypot(
                cand.ground_pos.x - track.last_pos.x, cand.ground_pos.y - track.last_pos.y
            )
            if d <= cfg.track_gate:
                pairs.append((d, ci, tid))
    pairs.sort(key=lambda p: (p[0], p[1], p[2]))

    cand_to_track: dict[int, int] = {}
    used_tracks: set[int] = set()
    for d, ci, tid in pairs:
        if ci in cand_to_track or tid in used_tracks:
            continue
        cand_to_track[ci] = tid
        used_tracks.add(tid)

    confirmed = []
    new_tracks: dict[int, Track] = {}
    for ci, cand in enumerate(cands):
        tid = cand_to_track.get(ci)
        if tid is None:
            track = Track(
                id=tracker.next_id,
                last_pos=cand.ground_pos,
                last_lambda1=cand.region.lambda1,
                hits=1,
                last_frame=frame,
            )
            tracker.next_id += 1
        else:
            prev = alive[tid]
            rel_change = abs(cand.region.lambda1 - prev.last_lambda1) / max(
                prev.last_lambda1, RATIO_EPS
            )
            stable_strong = (
                cand.region.lambda1 > cfg.ev_fast_track and rel_change <= cfg.size_change_max
            )
            hits = prev.hits + 1
            need = 2 if stable_strong else cfg.confirm_frames
            if hits >= need:
                confirmed.append(cand)
            track = Track(
                id=prev.id,
                last_pos=cand.ground_pos,
                last_lambda1=cand.region.lambda1,
                hits=hits,
                last_frame=frame,
            )
        new_tracks[track.id] = track

    tracker.tracks = new_tracks
    tracker.last_frame = frame
    return confirmed


def obstacle_pose(region: Region, m: BirdviewMapping) -> tuple[GroundPoint, float]:
    """Ground position and radius from the region's bounding box.

    Position is the ground point under the midpoint of the box's bottom edge
    (that point lies on the ground plane even for tall obstacles); radius is
    the ground distance from there to the bottom-right corner, floored at half
    a bird-view pixel so downstream invariants hold for degenerate regions.
    """
    _, _, br, bl = region.quad
    mid = PixelCoord((bl.u + br.u) / 2.0, br.v)
    g_mid = birdview_to_ground(m, mid)
    g_br = birdview_to_ground(m, PixelCoord(br.u, br.v))
    radius = math.hypot(g_br.x - g_mid.x, g_br.y - g_mid.y)
    return g_mid, max(radius, 0.5 / m.scale)


def _line_pixels(a: PixelCoord, b: PixelCoord) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixels sampled at 1-px steps along the segment a -> b."""
    n = int(math.ceil(max(abs(b.u - a.u), abs(b.v - a.v)))) + 1
    us = np.rint(np.linspace(a.u, b.u, n)).astype(np.int64)
    vs = np.rint(np.linspace(a.v, b.v, n)).astype(np.int64)
    return us, vs


def _max_true_run(bits: np.ndarray) -> int:
    run = best = 0
    for b in bits:
        run = run + 1 if b else 0
        best = max(best, run)
    return best


def lane_boundary_check(
    white_mask: np.ndarray,
    robot_anchor: PixelCoord,
    obstacle_px: PixelCoord,
    radius_px: float = 0.0,
    white_run_min: int = 3,
) -> bool:
    """True when nothing white separates the robot anchor from the obstacle.

    Walks a fan of three search lines (center, and +/- one obstacle radius of
    lateral offset at the obstacle end); a run of white_run_min consecutive
    white pixels on any line marks the obstacle as beyond a lane boundary.
    """
    h, w = white_mask.shape

    def clamp(p: PixelCoord) -> PixelCoord:
        return PixelCoord(min(max(p.u, 0.0), w - 1.0), min(max(p.v, 0.0), h - 1.0))

    anchor = clamp(robot_anchor)
    for off in (-radius_px, 0.0, radius_px):
        end = clamp(PixelCoord(obstacle_px.u + off, obstacle_px.v))
        us, vs = _line_pixels(anchor, end)
        inside = (us >= 0) & (us < w) & (vs >= 0) & (vs < h)
        bits = np.zeros(us.shape, dtype=bool)
        bits[inside] = white_mask[vs[inside], us[inside]]
        if _max_true_run(bits) >= white_run_min:
            return False
    return True


@dataclass
class DetectionResult:
    """Obstacles plus the intermediate artifacts, for debugging and emission."""

    obstacles: list[Obstacle]
    crop_row: int
    mapping: BirdviewMapping
    birdview: np.ndarray
    masks: dict[str, np.ndarray]


def run_detection(
    frame: np.ndarray,
    cam: CameraModel,
    cfg: DetectionConfig,
    tracker: TrackerState,
    frame_index: int,
    bands: dict[str, ColorBand] | None = None,
    gain: ColorGain | None = None,
    out_width: int = 640,
    interpolation: str = "bilinear",
) -> DetectionResult:
    """Full detection pipeline for one frame; see the module docstring."""
    frame = np.asarray(frame)
    if frame.shape[0] != cam.height or frame.shape[1] != cam.width:
        raise ValueError(
            f"frame is {frame.shape[1]}x{frame.shape[0]}, camera expects {cam.width}x{cam.height}"
        )
    if bands is None:
        bands = colorspace.DEFAULT_BANDS
    if gain is not None:
        frame = colorspace.apply_color_gain(frame, gain)

    # The crop row and bird-view mapping depend only on the camera and two
    # scalars; reuse them across the frame stream (the warp caches its
    # sampling grids on the mapping instance).
    cache_key = (cfg.crop_distance, out_width)
    cache = getattr(cam, "_pipeline_cache", None)
    if cache is None or cache[0] != cache_key:
        crop_row = crop_row_for_distance(cam, cfg.crop_distance)
        mapping = compute_birdview_transform(cam, crop_row, out_width)
        cam._pipeline_cache = (cache_key, crop_row, mapping)
    else:
        _, crop_row, mapping = cache
    bird = warp_to_birdview(frame[crop_row:], mapping, method=interpolation)
    hsv = colorspace.rgb_image_to_hsv(bird)
    masks = {name: colorspace.apply_band_filter(hsv, bands[name]) for name in ("yellow", "orange", "white")}

    min_px = min_pixel_threshold(cfg, mapping)
    scaled_cfg = scale_adjusted(cfg, mapping)
    confirmed: list[tuple[Candidate, str]] = []

    yellow_cands: list[Candidate] = []
    for color in ("yellow", "orange"):
        li = label_components(masks[color])
        for region in all_region_properties(li, color_class=color):
            if region.area < min_px:
                continue
            if color == "orange":
                if classify_orange(region, scaled_cfg) != CLASS_CONE:
                    continue
                pos, radius = obstacle_pose(region, mapping)
                confirmed.append((Candidate(region, pos, radius, frame_index), "orange"))
            else:
                if classify_yellow(region, scaled_cfg) == CLASS_REJECTED:
                    continue
                pos, radius = obstacle_pose(region, mapping)
                yellow_cands.append(Candidate(region, pos, radius, frame_index))

    for cand in track_update(tracker, yellow_cands, frame_index, scaled_cfg):
        confirmed.append((cand, "yellow"))

    anchor = ground_to_birdview(mapping, GroundPoint(0.0, 0.0))
    obstacles = []
    for cand, color in confirmed:
        _, _, br, bl = cand.region.quad
        bottom_mid = PixelCoord((bl.u + br.u) / 2.0, br.v)
        radius_px = cand.radius * mapping.scale
        in_lane = lane_boundary_check(
            masks["white"], anchor, bottom_mid, radius_px, cfg.white_run_min
        )
        obstacles.append(
            Obstacle(
                x=cand.ground_pos.x,
                y=cand.ground_pos.y,
                radius=cand.radius,
                in_lane=in_lane,
                quad=cand.region.quad,
                color_class=color,
            )
        )
    obstacles.sort(key=lambda o: (o.x, o.y))
    return DetectionResult(
        obstacles=obstacles, crop_row=crop_row, mapping=mapping, birdview=bird, masks=masks
    )


def detect_obstacles(
    frame: np.ndarray,
    cam: CameraModel,
    cfg: DetectionConfig,
    tracker: TrackerState,
    frame_index: int,
    **kwargs,
) -> list[Obstacle]:
    """Obstacle list for one frame, sorted by increasing forward distance."""
    return run_detection(frame, cam, cfg, tracker, frame_index, **kwargs).obstacles


def obstacle_to_json(ob: Obstacle, frame_index: int, timestamp: float) -> dict:
    """Pose-array style record: z carries the radius, negated when out of lane."""
    return {
        "x_m": ob.x,
        "y_m": ob.y,
        "z_m": ob.radius if ob.in_lane else -ob.radius,
        "quad_px": [[p.u, p.v] for p in ob.quad],
        "color": ob.color_class,
        "frame_index": frame_index,
        "timestamp": timestamp,
    }


def obstacle_from_json(rec: dict) -> Obstacle:
    """Inverse of obstacle_to_json; the z sign decodes the in-lane flag."""
    z = rec["z_m"]
    quad = tuple(PixelCoord(float(u), float(v)) for u, v in rec["quad_px"])
    return Obstacle(
        x=float(rec["x_m"]),
        y=float(rec["y_m"]),
        radius=abs(z),
        in_lane=z >= 0,
        quad=quad,
        color_class=rec.get("color", ""),
    )
