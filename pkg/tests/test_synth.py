import math

import numpy as np
import pytest

from ipmdetect import (
    Billboard,
    CameraPose,
    DetectionConfig,
    GroundPoint,
    GroundRect,
    LaneGeometry,
    PinholeParams,
    PixelCoord,
    SceneSpec,
    SynthCamera,
    make_camera,
    pixel_to_ground,
    project_points,
    render_scene,
    scene_ground_truth,
    standard_road,
)
from ipmdetect.colorspace import ColorGain
from ipmdetect.synth import _paint_convex

from helpers import make_synth_camera, ray_plane_ground_oracle


class TestMakeCamera:
    def test_round_trip_against_ray_plane_oracle(self):
        cam = make_synth_camera(height_m=0.1, pitch_deg=15.0)
        rng = np.random.default_rng(4)
        for _ in range(20):
            u = rng.uniform(0, 639)
            v = rng.uniform(260, 479)  # safely below the horizon
            oracle = ray_plane_ground_oracle(cam, u, v)
            assert oracle is not None
            g = pixel_to_ground(cam.model, PixelCoord(u, v))
            assert math.hypot(g.x - oracle[0], g.y - oracle[1]) < 1e-9

    def test_yawed_camera_against_oracle(self):
        cam = make_synth_camera(height_m=0.13, pitch_deg=24.0, yaw_deg=7.0)
        for u, v in [(100.0, 300.0), (320.0, 400.0), (600.0, 460.0)]:
            oracle = ray_plane_ground_oracle(cam, u, v)
            g = pixel_to_ground(cam.model, PixelCoord(u, v))
            assert math.hypot(g.x - oracle[0], g.y - oracle[1]) < 1e-9

    def test_near_nadir_is_similarity_like(self):
        # Exact nadir is excluded by construction; just below it the ground
        # map must be almost perspective-free.
        cam = make_synth_camera(height_m=0.3, pitch_deg=89.5)
        H = cam.model.H / cam.model.H[2, 2]
        assert abs(H[2, 0]) < 1e-3 and abs(H[2, 1]) < 1e-3

    def test_exact_nadir_rejected(self):
        with pytest.raises(ValueError):
            CameraPose(height_m=0.3, pitch_rad=math.pi / 2)

    def test_doubling_f_halves_ground_span(self):
        # Rows near the principal point: the projective relation there makes
        # the centerline ground span scale inversely with the focal length.
        rows = (242.0, 250.0)
        spans = []
        for f in (300.0, 600.0):
            cam = make_synth_camera(f=f, pitch_deg=30.0, height_m=0.2)
            xs = []
            for v in rows:
                g = pixel_to_ground(cam.model, PixelCoord(320.0, v))
                expect = 0.2 / math.tan(math.radians(30.0) + math.atan((v - 240.0) / f))
                assert g.x == pytest.approx(expect, abs=1e-9)
                xs.append(g.x)
            spans.append(xs[0] - xs[1])
        assert spans[1] == pytest.approx(spans[0] / 2.0, rel=0.1)

    def test_make_camera_is_invertible_model(self):
        pp = PinholeParams(f=320.0, cx=320.0, cy=240.0, width=640, height=480)
        pose = CameraPose(height_m=0.12, pitch_rad=math.radians(18.0))
        cam = make_camera(pp, pose)
        assert cam.width == 640 and cam.height == 480

    def test_project_points_depth_sign(self):
        cam = make_synth_camera()
        uv, z = project_points(cam, np.array([[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]]))
        assert z[0] > 0 > z[1]


class TestPaintConvexCoverage:
    def test_matches_supersampling_oracle(self):
        # Dual route for the exact-coverage rasterizer: 32x32 subsampling.
        poly = np.array([[3.2, 2.7], [17.8, 4.1], [15.3, 14.9], [5.1, 12.2]])
        img = np.zeros((20, 24, 3))
        _paint_convex(img, poly, (255.0, 255.0, 255.0))
        alpha = img[:, :, 0] / 255.0

        k = 32
        offs = (np.arange(k) + 0.5) / k - 0.5
        from matplotlib.path import Path

        path = Path(poly)
        for v in range(20):
            for u in range(24):
                pts = np.array([(u + du, v + dv) for dv in offs for du in offs])
                estimate = path.contains_points(pts).mean()
                assert abs(alpha[v, u] - estimate) <= 2.0 / k

    def test_total_coverage_equals_polygon_area(self):
        poly = np.array([[2.5, 3.5], [12.5, 3.5], [12.5, 9.5], [2.5, 9.5]])
        img = np.zeros((16, 16, 3))
        _paint_convex(img, poly, (255.0, 255.0, 255.0))
        assert img[:, :, 0].sum() / 255.0 == pytest.approx(60.0, abs=1e-9)

    def test_degenerate_polygons_ignored(self):
        img = np.zeros((4, 4, 3))
        _paint_convex(img, np.array([[1.0, 1.0], [2.0, 2.0]]), (255, 255, 255))
        _paint_convex(img, np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]), (255, 255, 255))
        assert not img.any()


class TestRenderScene:
    def test_empty_scene_ground_and_sky_only(self):
        cam = make_synth_camera()
        img = render_scene(SceneSpec(), cam)
        colors = {tuple(c) for c in np.unique(img.reshape(-1, 3), axis=0)}
        # Ground gray below the horizon, black sky above, AA blend between.
        assert (45, 45, 45) in colors
        assert (0, 0, 0) in colors
        assert all(c[0] == c[1] == c[2] and c[0] <= 45 for c in colors)
        assert np.array_equal(img, render_scene(SceneSpec(), cam))

    def test_ground_square_recovered_metrically(self):
        from ipmdetect import compute_birdview_transform, crop_row_for_distance, warp_to_birdview

        cam = make_synth_camera()
        side = 0.1
        spec = SceneSpec(
            ground_elements=[GroundRect(center=(0.8, 0.0), size=(side, side), color=(255, 0, 0))],
            ground_color=(0, 0, 0),
        )
        img = render_scene(spec, cam)
        crop = crop_row_for_distance(cam.model, 1.7)
        m = compute_birdview_transform(cam.model, crop)
        bird = warp_to_birdview(img[crop:], m).astype(np.float64)
        area = bird[:, :, 0].sum() / 255.0
        assert math.sqrt(area) == pytest.approx(side * m.scale, rel=0.02)

    def test_billboard_inflates_in_birdview(self):
        from ipmdetect import compute_birdview_transform, crop_row_for_distance, warp_to_birdview

        cam = make_synth_camera()
        fp = 0.06
        spec = SceneSpec(
            obstacles=[Billboard("cone", GroundPoint(0.7, 0.0), footprint_m=fp, height_m=0.25)],
            ground_color=(0, 0, 0),
        )
        img = render_scene(spec, cam)
        crop = crop_row_for_distance(cam.model, 1.7)
        m = compute_birdview_transform(cam.model, crop)
        bird = warp_to_birdview(img[crop:], m).astype(np.float64)
        vs, us = np.nonzero(bird.max(axis=2) > 60)
        extent = vs.max() - vs.min()
        assert extent > 1.5 * fp * m.scale  # far beyond the footprint scale

    def test_resolution_doubling_reproduces_render(self):
        # Exact-coverage rendering makes 2x supersampling a box-filter no-op;
        # only uint8 quantization survives, bounded by 2/255 per pixel.
        pp = PinholeParams(f=150.0, cx=160.0, cy=120.0, width=320, height=240)
        pose = CameraPose(height_m=0.11, pitch_rad=math.radians(20.0))
        cam = SynthCamera(pinhole=pp, pose=pose)
        spec = SceneSpec(
            ground_elements=[
                GroundRect(center=(0.6, -0.1), size=(0.2, 0.05), color=(250, 80, 40), yaw_rad=0.3),
                GroundRect(center=(1.0, 0.15), size=(0.08, 0.08), color=(30, 200, 60)),
            ],
            obstacles=[Billboard("duck", GroundPoint(0.8, 0.02), 0.05, 0.04)],
        )
        base = render_scene(spec, cam).astype(np.float64)

        pp2 = PinholeParams(f=300.0, cx=320.5, cy=240.5, width=640, height=480)
        cam2 = SynthCamera(pinhole=pp2, pose=pose)
        fine = render_scene(spec, cam2).astype(np.float64)
        down = fine.reshape(240, 2, 320, 2, 3).mean(axis=(1, 3))
        assert np.abs(down - base).max() <= 2.0

    def test_ambient_gain_applied(self):
        cam = make_synth_camera()
        spec = SceneSpec(ambient_gain=ColorGain(a=(0.5, 0.5, 0.5), b=(0.0, 0.0, 0.0)))
        img = render_scene(spec, cam)
        assert img.max() <= 23  # ground gray 45 halved

    def test_noise_is_seeded_and_per_frame(self):
        cam = make_synth_camera()
        spec = SceneSpec(noise_sigma=3.0, seed=5)
        a0 = render_scene(spec, cam, frame_index=0)
        a0_again = render_scene(spec, cam, frame_index=0)
        a1 = render_scene(spec, cam, frame_index=1)
        assert np.array_equal(a0, a0_again)
        assert not np.array_equal(a0, a1)

    def test_motion_blur_smears_horizontally(self):
        cam = make_synth_camera()
        spec = SceneSpec(
            ground_elements=[GroundRect(center=(0.7, 0.0), size=(0.3, 0.02), color=(255, 0, 0))],
            ground_color=(0, 0, 0),
        )
        sharp = render_scene(spec, cam)
        spec.motion_blur_px = 9
        blurred = render_scene(spec, cam)
        assert (blurred[:, :, 0] > 0).sum() > (sharp[:, :, 0] > 0).sum()

    def test_obstacle_velocity_moves_between_frames(self):
        cam = make_synth_camera()
        bb = Billboard("duck", GroundPoint(1.0, 0.0), 0.05, 0.04, velocity=(-0.1, 0.0))
        spec = SceneSpec(obstacles=[bb], ground_color=(0, 0, 0))
        img0 = render_scene(spec, cam, frame_index=0)
        img3 = render_scene(spec, cam, frame_index=3)
        assert not np.array_equal(img0, img3)
        assert bb.position_at(3).x == pytest.approx(0.7)


class TestSceneGroundTruth:
    def test_duck_inside_lane(self):
        elements, lane = standard_road()
        spec = SceneSpec(
            ground_elements=elements,
            obstacles=[Billboard("duck", GroundPoint(0.5, 0.0), 0.05, 0.04)],
        )
        (truth,) = scene_ground_truth(spec, DetectionConfig())
        assert truth.in_lane and truth.kind == "duck"
        assert truth.radius == pytest.approx(0.025)

    def test_obstacle_beyond_white_line_out_of_lane(self):
        elements, _ = standard_road()
        spec = SceneSpec(
            ground_elements=elements,
            obstacles=[Billboard("cone", GroundPoint(0.8, -0.3), 0.06, 0.2)],
        )
        (truth,) = scene_ground_truth(spec, DetectionConfig())
        assert not truth.in_lane

    def test_white_stripe_between_makes_out_of_lane(self):
        spec = SceneSpec(
            ground_elements=[GroundRect(center=(0.4, 0.0), size=(0.05, 0.3), color=(240, 240, 240))],
            obstacles=[Billboard("cone", GroundPoint(0.8, 0.0), 0.06, 0.2)],
        )
        (truth,) = scene_ground_truth(spec, DetectionConfig())
        assert not truth.in_lane

    def test_yellow_dash_between_does_not_exclude(self):
        spec = SceneSpec(
            ground_elements=[GroundRect(center=(0.4, 0.0), size=(0.05, 0.3), color=(210, 180, 40))],
            obstacles=[Billboard("duck", GroundPoint(0.8, 0.0), 0.05, 0.04)],
        )
        (truth,) = scene_ground_truth(spec, DetectionConfig())
        assert truth.in_lane

    def test_beyond_crop_distance_excluded(self):
        cfg = DetectionConfig()
        spec = SceneSpec(
            obstacles=[Billboard("duck", GroundPoint(cfg.crop_distance + 0.2, 0.0), 0.05, 0.04)]
        )
        assert scene_ground_truth(spec, cfg) == []

    def test_lane_geometry_override(self):
        spec = SceneSpec(obstacles=[Billboard("duck", GroundPoint(0.5, 0.2), 0.05, 0.04)])
        lane = LaneGeometry(y_min=-0.1, y_max=0.1)
        (truth,) = scene_ground_truth(spec, DetectionConfig(), lane=lane)
        assert not truth.in_lane

    def test_moving_obstacle_truth_follows_frames(self):
        spec = SceneSpec(
            obstacles=[Billboard("duck", GroundPoint(1.0, 0.0), 0.05, 0.04, velocity=(-0.2, 0.0))]
        )
        t0 = scene_ground_truth(spec, DetectionConfig(), frame_index=0)
        t2 = scene_ground_truth(spec, DetectionConfig(), frame_index=2)
        assert t0[0].x == pytest.approx(1.0)
        assert t2[0].x == pytest.approx(0.6)

    def test_sorted_by_distance(self):
        spec = SceneSpec(
            obstacles=[
                Billboard("duck", GroundPoint(1.2, 0.0), 0.05, 0.04),
                Billboard("cone", GroundPoint(0.5, 0.1), 0.06, 0.2),
            ]
        )
        truth = scene_ground_truth(spec, DetectionConfig())
        assert [t.x for t in truth] == sorted(t.x for t in truth)


class TestStandardRoad:
    def test_lane_corridor_matches_line_edges(self):
        elements, lane = standard_road()
        whites = [el for el in elements if el.color == (240, 240, 240)]
        assert len(whites) == 2
        ys = sorted(el.center[1] for el in whites)
        assert lane.y_min == pytest.approx(ys[0] + whites[0].size[1] / 2.0)
        assert lane.y_max == pytest.approx(ys[1] - whites[0].size[1] / 2.0)

    def test_stop_line_optional(self):
        without, _ = standard_road()
        with_stop, _ = standard_road(stop_line_x=0.5)
        assert len(with_stop) == len(without) + 1
