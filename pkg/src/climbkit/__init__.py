"""climbkit: hold-usage detection for climbing videos and its evaluation harness.

The toolkit turns 2D pose keypoint streams plus per-video hold annotations
into (extremity, hold, start, end) usage intervals, and scores such
predictions against ground truth with temporal-IoU matched accuracy,
precision, and sensitivity. Supporting pieces: annotation/stream file
formats, wall-plane homography calibration, dataset statistics, and a
synthetic-climb simulator used as the test oracle.
"""

from .annotations import (
    WALL,
    Extremity,
    FrameRecord,
    Hold,
    Keypoint,
    KeypointStream,
    LimbKind,
    PersonPose,
    RouteTopo,
    UsageInterval,
    Wall,
    iter_keypoint_frames,
    parse_keypoints,
    parse_topo,
    parse_usage,
    read_keypoints,
    read_topo,
    read_usage,
    serialize_keypoints,
    serialize_topo,
    serialize_usage,
    write_keypoints,
    write_topo,
    write_usage,
)
from .detector import (
    DetectionEvent,
    DetectionState,
    DetectorConfig,
    RunStats,
    detect,
    events_to_intervals,
    finish,
    memory_frames,
    persistence_frames,
    select_climber,
    step,
)
from .evaluation import (
    EvalReport,
    MatchMode,
    MatchResult,
    MetricValues,
    VideoEval,
    compute_metrics,
    evaluate,
    match_intervals,
    temporal_iou,
)
from .geometry import (
    AABB,
    AoiConfig,
    FootAnchorKind,
    Homography,
    Point2,
    SkeletonConvention,
    estimate_homography,
    foot_aoi,
    get_convention,
    hand_aoi,
    overlaps,
    project,
    reprojection_error,
    wall_distance,
)
from .simulate import Move, ScenarioSpec, random_scenario, synthesize
from .stats import StatsReport, VideoAnnotations, compute_stats

__version__ = "0.1.0"
