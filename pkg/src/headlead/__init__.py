"""headlead: measures how far head orientation anticipates reach and transport goals.

The engine consumes per-frame perception records (keypoints, object boxes,
head-pose angles), reconstructs the gaze-on-table geometry, builds the
gaze/hand/object distance series, and detects the first-minimum event
times whose gap is the anticipation interval.
"""

from .config import ConfigError, SceneConfig, load_scene_config, scene_config_from_dict
from .events import (
    AnalysisWindows,
    AnticipationResult,
    EventDetectionError,
    EventTimes,
    OnlineMinDetector,
    compute_anticipation,
    detect_events,
    first_window_min,
    split_windows,
)
from .geometry import (
    GazeRay,
    Plane,
    TableLine,
    bbox_centroid,
    gaze_point_on_plane,
    gaze_point_on_table_line,
    head_anchor,
    head_pose_to_direction,
    wrist_position,
)
from .ingest import (
    Detection,
    FrameRecord,
    HeadPose,
    Keypoint,
    ParseError,
    Session,
    parse_session,
    repair_gaps,
    serialize_session,
    write_session,
)
from .pipeline import PhaseAnalysis, analyze_session, event_record, format_event_record
from .signals import (
    MaskedSeries,
    NoSignalError,
    SignalSet,
    TargetSpec,
    TargetUnresolvable,
    build_signals,
    select_target_object,
    smooth,
)
from .sim import GroundTruth, InvalidScenario, SimConfig, make_benchmark, scene_for, simulate_session
from .stats import ActionSummary, aggregate, render_report
from .stream import StreamAnalyzer

__version__ = "0.1.0"
