"""Command-line front end.

Verbs:
  detect       run the detection + planning pipeline over an image stream
  synth        render a scene spec into frames plus analytic ground truth
  eval         score per-frame predictions against ground truth
  calib-check  round-trip and horizon diagnostics for a calibration file

Exit codes: 0 success, 1 config or input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from . import avoidance as av
from . import config as cfgmod
from . import detection as det
from . import metrics as ev
from . import geometry as geo
from . import synth
from .errors import ConfigError, DegenerateProjection, HorizonNotInFrame, PipelineError

log = logging.getLogger("ipmdetect")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def _save_png(path: Path, img: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(img)).save(path)


def _load_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _mask_to_image(mask: np.ndarray) -> np.ndarray:
    return (mask.astype(np.uint8)) * 255


def _draw_box(img: np.ndarray, quad, color) -> None:
    """Outline an axis-aligned bird-view box in place (2 px border)."""
    h, w = img.shape[:2]
    u0 = int(np.clip(round(min(p.u for p in quad)), 0, w - 1))
    u1 = int(np.clip(round(max(p.u for p in quad)), 0, w - 1))
    v0 = int(np.clip(round(min(p.v for p in quad)), 0, h - 1))
    v1 = int(np.clip(round(max(p.v for p in quad)), 0, h - 1))
    c = np.asarray(color, dtype=img.dtype)
    img[v0 : min(v0 + 2, h), u0 : u1 + 1] = c
    img[max(v1 - 1, 0) : v1 + 1, u0 : u1 + 1] = c
    img[v0 : v1 + 1, u0 : min(u0 + 2, w)] = c
    img[v0 : v1 + 1, max(u1 - 1, 0) : u1 + 1] = c


def _annotate_birdview(result: det.DetectionResult) -> np.ndarray:
    out = result.birdview.copy()
    for ob in result.obstacles:
        color = (255, 40, 40) if ob.in_lane else (40, 255, 40)
        _draw_box(out, ob.quad, color)
    return out


def _iter_input_frames(cfg: cfgmod.RunConfig):
    """Yield (name, image) in stream order for the configured input source."""
    if cfg.input_files is not None:
        for path in cfg.input_files:
            yield path.stem, _load_image(path)
    elif cfg.input_dir is not None:
        paths = sorted(
            p for p in cfg.input_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not paths:
            raise ConfigError(f"no images found in {cfg.input_dir}")
        for path in paths:
            yield path.stem, _load_image(path)
    else:
        spec, cam, frames = cfgmod.load_scene(cfg.input_scene)
        if cam.pinhole.width != cfg.camera.width or cam.pinhole.height != cfg.camera.height:
            raise ConfigError("scene camera dimensions disagree with the calibration")
        for i in range(frames):
            yield f"frame_{i:06d}", synth.render_scene(spec, cam, frame_index=i)


def cmd_detect(args) -> int:
    cfg = cfgmod.load_run_config(args.config)
    if args.out:
        cfg.output_dir = Path(args.out)
    if args.emit:
        emit = set(args.emit.split(","))
        unknown = emit - set(cfgmod.EMIT_FLAGS)
        if unknown:
            raise ConfigError(f"unknown emit flags: {sorted(unknown)}")
        cfg.emit = emit
    if args.frames is not None:
        cfg.frames_limit = args.frames
    if cfg.input_sources_set() != 1:
        raise ConfigError("config must name exactly one input source (files, directory, or scene)")

    outdir = cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    tracker = det.TrackerState()
    latencies: list[float] = []
    processed = 0
    for index, (name, frame) in enumerate(_iter_input_frames(cfg)):
        if cfg.frames_limit is not None and processed >= cfg.frames_limit:
            break
        t0 = time.perf_counter()
        try:
            result = det.run_detection(
                frame,
                cfg.camera,
                cfg.detection,
                tracker,
                frame_index=index,
                bands=cfg.bands,
                gain=cfg.gain,
                out_width=cfg.out_width,
                interpolation=cfg.interpolation,
            )
        except (DegenerateProjection, HorizonNotInFrame) as e:
            log.warning("frame %s skipped: %s", name, e)
            continue
        command = av.plan(result.obstacles, av.LanePose(d=0.0, theta=0.0), cfg.avoidance)
        latencies.append((time.perf_counter() - t0) * 1000.0)
        processed += 1

        timestamp = index / cfg.fps
        if "json" in cfg.emit:
            record = {
                "frame_index": index,
                "timestamp": timestamp,
                "source": name,
                "obstacles": [det.obstacle_to_json(ob, index, timestamp) for ob in result.obstacles],
                "command": command.to_json(),
            }
            with open(outdir / f"{name}.json", "w", encoding="utf-8") as fh:
                json.dump(record, fh, indent=2, sort_keys=True)
                fh.write("\n")
        if "birdview" in cfg.emit:
            _save_png(outdir / f"{name}_birdview.png", result.birdview)
        if "annotated" in cfg.emit:
            _save_png(outdir / f"{name}_annotated.png", _annotate_birdview(result))
        if "masks" in cfg.emit:
            for mname, mask in result.masks.items():
                _save_png(outdir / f"{name}_mask_{mname}.png", _mask_to_image(mask))
        log.info("%s: %d obstacle(s), v_ref=%.2f", name, len(result.obstacles), command.v_ref)

    if "metrics" in cfg.emit:
        stats = ev.LatencyStats.from_samples(latencies)
        with open(outdir / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"frames": processed, "latency": stats.to_json(), "per_frame_ms": latencies},
                fh,
                indent=2,
            )
            fh.write("\n")
    if processed == 0:
        log.error("no frames were processed")
        return 1
    log.info("processed %d frame(s) into %s", processed, outdir)
    return 0


def cmd_synth(args) -> int:
    spec, cam, frames = cfgmod.load_scene(args.scene)
    if args.frames is not None:
        frames = args.frames
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    det_cfg = det.DetectionConfig()
    truth: dict[str, list[dict]] = {}
    for i in range(frames):
        img = synth.render_scene(spec, cam, frame_index=i)
        _save_png(outdir / f"frame_{i:06d}.png", img)
        expected = synth.scene_ground_truth(spec, det_cfg, frame_index=i)
        truth[str(i)] = [
            {"x": t.x, "y": t.y, "radius": t.radius, "in_lane": t.in_lane, "kind": t.kind}
            for t in expected
        ]
    with open(outdir / "truth.json", "w", encoding="utf-8") as fh:
        json.dump({"frames": truth}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(outdir / "config.yaml", "w", encoding="utf-8") as fh:
        cfg_dict = cfgmod.default_config_dict(cam.model)
        cfg_dict["input"] = {"directory": "."}
        yaml.safe_dump(cfg_dict, fh, sort_keys=False)
    log.info("rendered %d frame(s) + truth.json + config.yaml into %s", frames, outdir)
    return 0


def _read_predictions(pred_path: Path) -> dict[int, list[dict]]:
    files = sorted(pred_path.glob("*.json")) if pred_path.is_dir() else [pred_path]
    predictions: dict[int, list[dict]] = {}
    for f in files:
        if f.name in ("metrics.json", "truth.json", "report.json"):
            continue
        with open(f, "r", encoding="utf-8") as fh:
            rec = json.load(fh)
        predictions[int(rec["frame_index"])] = rec["obstacles"]
    return predictions


def cmd_eval(args) -> int:
    predictions = _read_predictions(Path(args.pred))
    with open(args.truth, "r", encoding="utf-8") as fh:
        truth_doc = json.load(fh)
    truth = {int(k): v for k, v in truth_doc["frames"].items()}
    latencies = None
    if args.latencies:
        with open(args.latencies, "r", encoding="utf-8") as fh:
            latencies = json.load(fh).get("per_frame_ms", [])
    report = ev.evaluate(predictions, truth, match_dist=args.match_dist, latencies_ms=latencies)
    doc = report.to_json()
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_calib_check(args) -> int:
    cfg = cfgmod.load_run_config(args.config)
    cam = cfg.camera
    print(f"image: {cam.width}x{cam.height}")
    print(f"|det H| = {abs(float(np.linalg.det(cam.H))):.3e}")

    us = np.linspace(0, cam.width - 1, 24)
    vs = np.linspace(0, cam.height - 1, 24)
    worst = 0.0
    n_ok = 0
    for u in us:
        for v in vs:
            try:
                g = geo.pixel_to_ground(cam, geo.PixelCoord(u, v))
                p = geo.ground_to_pixel(cam, g)
            except DegenerateProjection:
                continue
            worst = max(worst, abs(p.u - u), abs(p.v - v))
            n_ok += 1
    print(f"round-trip: {n_ok}/{len(us) * len(vs)} grid pixels valid, max error {worst:.3e} px")

    try:
        crop = geo.crop_row_for_distance(cam, cfg.detection.crop_distance)
        print(f"crop row for {cfg.detection.crop_distance} m: {crop}")
        m = geo.compute_birdview_transform(cam, crop, cfg.out_width)
        print(
            f"bird view: {m.out_width}x{m.out_height} px at {m.scale:.1f} px/m, "
            f"origin ({m.origin.x:.3f}, {m.origin.y:.3f}) m"
        )
    except (HorizonNotInFrame, DegenerateProjection) as e:
        print(f"calibration unusable at configured crop distance: {e}")
        return 1
    if worst > 1e-6:
        print("round-trip error exceeds 1e-6 px")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipmdetect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run detection + planning over an image stream")
    p.add_argument("--config", required=True, help="global YAML config")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--emit", help="comma list: annotated,masks,birdview,json,metrics")
    p.add_argument("--frames", type=int, help="process at most N frames")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="render a scene spec to frames + ground truth")
    p.add_argument("--scene", required=True, help="scene spec YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, help="override frame count")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="prediction dir or file")
    p.add_argument("--truth", required=True, help="truth.json from synth")
    p.add_argument("--match-dist", type=float, default=0.05, help="pairing distance (m)")
    p.add_argument("--latencies", help="metrics.json with per_frame_ms")
    p.add_argument("--out", help="write the report JSON here too")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calib-check", help="diagnose a calibration file")
    p.add_argument("--config", required=True, help="global YAML config")
    p.set_defaults(func=cmd_calib_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("%s", e)
        return 1
    except FileNotFoundError as e:
        log.error("input not found: %s", e)
        return 1
    except PipelineError as e:
        log.error("internal invariant violation: %s", e)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
