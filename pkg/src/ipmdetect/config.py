"""YAML configuration: global run config and declarative scene specs.

One human-readable file holds every tunable (calibration, color bands,
detector thresholds, planner geometry) so corpus-specific tuning is a
single-file edit.  See ``default_config_dict`` for the template.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .avoidance import AvoidanceConfig, GatingBox
from .colorspace import DEFAULT_BANDS, ColorBand, ColorGain
from .detection import DetectionConfig
from .errors import ConfigError
from .geometry import CameraModel, GroundPoint
from .synth import (
    Billboard,
    CameraPose,
    GroundRect,
    LaneGeometry,
    PinholeParams,
    SceneSpec,
    SynthCamera,
    standard_road,
)

EMIT_FLAGS = ("annotated", "masks", "birdview", "json", "metrics")


@dataclass
class RunConfig:
    camera: CameraModel
    bands: dict[str, ColorBand]
    detection: DetectionConfig
    avoidance: AvoidanceConfig
    gain: ColorGain | None = None
    out_width: int = 640
    interpolation: str = "bilinear"
    input_files: list[Path] | None = None
    input_dir: Path | None = None
    input_scene: Path | None = None
    output_dir: Path = Path("out")
    emit: set[str] = field(default_factory=lambda: {"json"})
    frames_limit: int | None = None
    fps: float = 30.0

    def input_sources_set(self) -> int:
        return sum(x is not None for x in (self.input_files, self.input_dir, self.input_scene))


def _require(d: dict, key: str, context: str):
    if key not in d:
        raise ConfigError(f"missing key '{key}' in {context}")
    return d[key]


def _load_yaml(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def _parse_band(name: str, d: dict) -> ColorBand:
    try:
        h = d["h"]
        s = d["s"]
        v = d["v"]
        return ColorBand(
            name,
            h_lo=float(h[0]),
            h_hi=float(h[1]),
            s_lo=float(s[0]),
            s_hi=float(s[1]),
            v_lo=float(v[0]),
            v_hi=float(v[1]),
        )
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise ConfigError(f"band '{name}' needs h/s/v [lo, hi] pairs: {e}") from e


def _parse_gain(d: dict | None) -> ColorGain | None:
    if d is None:
        return None
    a = d.get("a", [1.0, 1.0, 1.0])
    b = d.get("b", [0.0, 0.0, 0.0])
    if len(a) != 3 or len(b) != 3:
        raise ConfigError("color_gain a/b must each list 3 per-channel values")
    return ColorGain(a=tuple(float(x) for x in a), b=tuple(float(x) for x in b))


def run_config_from_dict(data: dict, base_dir: Path) -> RunConfig:
    cam_d = _require(data, "camera", "config")
    H = _require(cam_d, "homography", "camera section")
    if not isinstance(H, (list, tuple)) or len(H) != 9:
        raise ConfigError("camera.homography must list 9 row-major floats (pixel -> ground)")
    try:
        camera = CameraModel(
            np.array(H, dtype=np.float64).reshape(3, 3),
            int(_require(cam_d, "width", "camera section")),
            int(_require(cam_d, "height", "camera section")),
        )
    except ValueError as e:
        raise ConfigError(f"invalid camera calibration: {e}") from e

    bands = dict(DEFAULT_BANDS)
    for name, bd in (data.get("bands") or {}).items():
        bands[name] = _parse_band(name, bd)
    for needed in ("yellow", "orange", "white"):
        if needed not in bands:
            raise ConfigError(f"band '{needed}' must be defined")

    det_d = dict(data.get("detection") or {})
    det_d.setdefault("crop_distance", data.get("crop_distance_m", 1.7))
    try:
        detection = DetectionConfig(**det_d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid detection section: {e}") from e

    av_d = data.get("avoidance") or {}
    try:
        avoidance = AvoidanceConfig(
            lane_width=float(av_d.get("lane_width_m", 0.46)),
            robot_width=float(av_d.get("robot_width_m", 0.13)),
            safety_margin=float(av_d.get("safety_margin_m", 0.05)),
            box=GatingBox(
                length=float(av_d.get("box_length_m", 0.6)),
                half_width=float(av_d.get("box_half_width_m", 0.25)),
            ),
            cruise_speed=float(av_d.get("cruise_speed_mps", 0.25)),
            strict_stop=bool(av_d.get("strict_stop", True)),
        )
    except ValueError as e:
        raise ConfigError(f"invalid avoidance section: {e}") from e

    inp = data.get("input") or {}
    input_files = input_dir = input_scene = None
    if "files" in inp:
        input_files = [Path(base_dir, f) for f in inp["files"]]
        for f in input_files:
            if not f.exists():
                raise ConfigError(f"input file does not exist: {f}")
    if "directory" in inp:
        input_dir = Path(base_dir, inp["directory"])
        if not input_dir.is_dir():
            raise ConfigError(f"input directory does not exist: {input_dir}")
    if "scene" in inp:
        input_scene = Path(base_dir, inp["scene"])
        if not input_scene.exists():
            raise ConfigError(f"scene spec does not exist: {input_scene}")

    emit = set(data.get("emit", ["json"]))
    unknown = emit - set(EMIT_FLAGS)
    if unknown:
        raise ConfigError(f"unknown emit flags: {sorted(unknown)}")

    cfg = RunConfig(
        camera=camera,
        bands=bands,
        detection=detection,
        avoidance=avoidance,
        gain=_parse_gain(data.get("color_gain")),
        out_width=int(data.get("birdview_width", 640)),
        interpolation=str(data.get("interpolation", "bilinear")),
        input_files=input_files,
        input_dir=input_dir,
        input_scene=input_scene,
        output_dir=Path(base_dir, data.get("output_dir", "out")),
        emit=emit,
        frames_limit=data.get("frames"),
        fps=float(data.get("fps", 30.0)),
    )
    if cfg.interpolation not in ("bilinear", "nearest"):
        raise ConfigError(f"interpolation must be bilinear or nearest, got {cfg.interpolation!r}")
    return cfg


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return run_config_from_dict(_load_yaml(path), path.parent)


def default_config_dict(camera: CameraModel | None = None) -> dict:
    """Config template with every tunable at its shipped default."""
    if camera is not None:
        H = [float(x) for x in camera.H.reshape(-1)]
        width, height = camera.width, camera.height
    else:
        H = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        width, height = 640, 480
    det = DetectionConfig()
    av = AvoidanceConfig()
    return {
        "camera": {"homography": H, "width": width, "height": height},
        "crop_distance_m": det.crop_distance,
        "birdview_width": 640,
        "interpolation": "bilinear",
        "fps": 30.0,
        "bands": {
            name: {
                "h": [band.h_lo, band.h_hi],
                "s": [band.s_lo, band.s_hi],
                "v": [band.v_lo, band.v_hi],
            }
            for name, band in DEFAULT_BANDS.items()
        },
        "detection": {
            "min_pixels_base": det.min_pixels_base,
            "ev_accept": det.ev_accept,
            "ev_fast_track": det.ev_fast_track,
            "size_change_max": det.size_change_max,
            "confirm_frames": det.confirm_frames,
            "cone_ratio_threshold": det.cone_ratio_threshold,
            "track_gate": det.track_gate,
            "reference_scale": det.reference_scale,
            "white_run_min": det.white_run_min,
        },
        "avoidance": {
            "lane_width_m": av.lane_width,
            "robot_width_m": av.robot_width,
            "safety_margin_m": av.safety_margin,
            "box_length_m": av.box.length,
            "box_half_width_m": av.box.half_width,
            "cruise_speed_mps": av.cruise_speed,
            "strict_stop": av.strict_stop,
        },
    }


def scene_from_dict(data: dict) -> tuple[SceneSpec, SynthCamera, int]:
    """Parse a scene spec; returns (scene, camera, frame count)."""
    cam_d = _require(data, "camera", "scene spec")
    try:
        pp = PinholeParams(
            f=float(_require(cam_d, "f", "scene camera")),
            cx=float(cam_d.get("cx", cam_d["width"] / 2.0)),
            cy=float(cam_d.get("cy", cam_d["height"] / 2.0)),
            width=int(_require(cam_d, "width", "scene camera")),
            height=int(_require(cam_d, "height", "scene camera")),
        )
        pose = CameraPose(
            height_m=float(_require(cam_d, "height_m", "scene camera")),
            pitch_rad=float(_require(cam_d, "pitch_rad", "scene camera")),
            yaw_rad=float(cam_d.get("yaw_rad", 0.0)),
        )
    except (ValueError, KeyError) as e:
        raise ConfigError(f"invalid scene camera: {e}") from e
    cam = SynthCamera(pinhole=pp, pose=pose)

    elements: list[GroundRect] = []
    lane = None  # unset: ground truth mirrors the white-crossing semantics
    road_d = data.get("road")
    if road_d:
        elements, _ = standard_road(
            length=float(road_d.get("length", 2.2)),
            lane_half_width=float(road_d.get("lane_half_width", 0.115)),
            stop_line_x=road_d.get("stop_line_x"),
        )
    for el in data.get("ground_elements", []) or []:
        try:
            elements.append(
                GroundRect(
                    center=tuple(float(c) for c in el["center"]),
                    size=tuple(float(s) for s in el["size"]),
                    color=tuple(int(c) for c in el["color"]),
                    yaw_rad=float(el.get("yaw_rad", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid ground element {el!r}: {e}") from e

    obstacles = []
    for ob in data.get("obstacles", []) or []:
        try:
            color = ob.get("color")
            obstacles.append(
                Billboard(
                    kind=str(ob.get("kind", "duck")),
                    position=GroundPoint(float(ob["position"][0]), float(ob["position"][1])),
                    footprint_m=float(ob["footprint_m"]),
                    height_m=float(ob["height_m"]),
                    color=tuple(int(c) for c in color) if color else None,
                    velocity=tuple(float(v) for v in ob.get("velocity", (0.0, 0.0))),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid obstacle {ob!r}: {e}") from e

    if "lane" in data and data["lane"] is not None:
        lane = LaneGeometry(y_min=float(data["lane"]["y_min"]), y_max=float(data["lane"]["y_max"]))

    spec = SceneSpec(
        ground_elements=elements,
        obstacles=obstacles,
        ground_color=tuple(data.get("ground_color", (45, 45, 45))),
        sky_color=tuple(data.get("sky_color", (0, 0, 0))),
        ambient_gain=_parse_gain(data.get("ambient_gain")),
        noise_sigma=float(data.get("noise_sigma", 0.0)),
        motion_blur_px=int(data.get("motion_blur_px", 0)),
        seed=int(data.get("seed", 0)),
        lane=lane,
    )
    frames = int(data.get("frames", 1))
    if frames < 1:
        raise ConfigError("scene frames must be at least 1")
    return spec, cam, frames


def load_scene(path: str | Path) -> tuple[SceneSpec, SynthCamera, int]:
    return scene_from_dict(_load_yaml(Path(path)))
