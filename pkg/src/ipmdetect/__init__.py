"""Monocular ground-plane obstacle detection via inverse perspective mapping.

The library detects ducks and cones on a known ground plane from single
calibrated RGB frames: it warps the image to a metric bird's-eye view, filters
yellow/orange in HSV, labels connected components, classifies regions by the
eigenvalues of their inertia tensor, confirms detections across frames, and
plans a lateral-offset or emergency-stop response in the lane frame.
"""

from .avoidance import (
    AvoidanceCommand,
    AvoidanceConfig,
    GatingBox,
    LanePose,
    gate_obstacles,
    plan,
    to_lane_frame,
)
from .colorspace import (
    DEFAULT_BANDS,
    ColorBand,
    ColorGain,
    HsvPixel,
    apply_band_filter,
    apply_color_gain,
    rgb_image_to_hsv,
    rgb_to_hsv,
)
from .detection import (
    Candidate,
    DetectionConfig,
    DetectionResult,
    Obstacle,
    Track,
    TrackerState,
    classify_orange,
    classify_yellow,
    detect_obstacles,
    eigenvalue_ratio,
    lane_boundary_check,
    min_pixel_threshold,
    obstacle_from_json,
    obstacle_pose,
    obstacle_to_json,
    run_detection,
    track_update,
)
from .errors import (
    ConfigError,
    DegenerateProjection,
    FrameMismatch,
    HorizonNotInFrame,
    InvalidPose,
    NonMonotonicFrame,
    NotPSD,
    PipelineError,
    UnknownLabel,
)
from .metrics import ClassCounts, EvalReport, LatencyStats, evaluate
from .geometry import (
    BirdviewMapping,
    CameraModel,
    GroundPoint,
    PixelCoord,
    birdview_to_ground,
    compute_birdview_transform,
    crop_row_for_distance,
    ground_to_birdview,
    ground_to_pixel,
    pixel_to_ground,
    warp_to_birdview,
)
from .segmentation import (
    LabelImage,
    Region,
    all_region_properties,
    inertia_eigenvalues,
    label_components,
    region_properties,
)
from .synth import (
    Billboard,
    CameraPose,
    GroundRect,
    LaneGeometry,
    PinholeParams,
    SceneSpec,
    SynthCamera,
    TruthObstacle,
    make_camera,
    project_points,
    render_scene,
    scene_ground_truth,
    standard_road,
)

__version__ = "0.1.0"
