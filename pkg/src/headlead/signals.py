"""Distance time-series construction: gaze-to-target, hand-to-object,
object-to-target, with validity masks and median smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import geometry
from .geometry import GazeRay, ProjectionError, HandUndefined, GazeUndefined, vec3
from .ingest import Session

if TYPE_CHECKING:
    from .config import SceneConfig

DEFAULT_ASSOCIATION_RADIUS = 80.0  # px; nearest-neighbor gate for the object track
DEFAULT_SMOOTHING_HALF_WIDTH = 2   # 5-frame median at 30 fps


def point_distance(a, b) -> float:
    """Euclidean distance between two 3-points.

    Scalar arithmetic shared by the batch and stream paths, so both
    produce bit-identical distance series.
    """
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def median_of(values) -> float:
    """Median of a nonempty sequence; even counts average the two middles.

    Shared by the batch and stream smoothers (bit-identical outputs).
    """
    ordered = sorted(values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return float(ordered[mid])
    return (float(ordered[mid - 1]) + float(ordered[mid])) / 2.0


class TargetUnresolvable(ValueError):
    """The configured object class never appears in the session."""


class NoSignalError(ValueError):
    """Every frame of every required series is invalid."""


@dataclass(frozen=True)
class TargetSpec:
    """What the subject is assumed to aim at.

    kind="object": the gaze target is the tracked object itself (reaching).
    kind="position": the gaze target is a fixed table position known a
    priori (transporting); object_class still names the object being moved.
    action_labels optionally restricts the target to matching sessions.
    """

    kind: str
    object_class: str
    target_position: np.ndarray | None = None
    action_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("object", "position"):
            raise ValueError(f"target kind must be 'object' or 'position', got {self.kind!r}")
        if not self.object_class:
            raise ValueError("object_class is required")
        if self.kind == "position":
            if self.target_position is None:
                raise ValueError("kind='position' requires target_position")
            pos = np.asarray(self.target_position, dtype=float)
            if pos.shape == (2,):
                pos = np.array([pos[0], pos[1], 0.0])
            if pos.shape != (3,) or not np.all(np.isfinite(pos)):
                raise ValueError("target_position must be a finite 2- or 3-vector")
            object.__setattr__(self, "target_position", pos)
        elif self.target_position is not None:
            raise ValueError("kind='object' takes no target_position")

    def applies_to(self, action_label: str | None) -> bool:
        return self.action_labels is None or action_label in self.action_labels

    @property
    def phase(self) -> str:
        return "reach" if self.kind == "object" else "transport"


@dataclass
class MaskedSeries:
    """A per-frame scalar series with a validity mask (NaN where invalid)."""

    frame_index: np.ndarray
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.frame_index = np.asarray(self.frame_index, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def invalid(cls, frame_index: np.ndarray) -> "MaskedSeries":
        n = len(frame_index)
        return cls(frame_index, np.full(n, math.nan), np.zeros(n, dtype=bool))

    def copy(self) -> "MaskedSeries":
        return MaskedSeries(self.frame_index.copy(), self.values.copy(), self.valid.copy())


@dataclass
class ObjectTrack:
    """Per-frame centroid of the followed object instance."""

    frame_index: np.ndarray
    positions: np.ndarray  # (n, 3), NaN rows where invalid
    valid: np.ndarray
    initial_position: np.ndarray | None


@dataclass
class SignalSet:
    """The three distance series underlying event detection."""

    d_g: MaskedSeries
    d_h: MaskedSeries
    d_o: MaskedSeries
    frame_count: int
    units_tag: str
    hand: str | None = None


class ObjectTrackFollower:
    """Stateful nearest-neighbor association of one object instance.

    The first frame with the class present seeds the track with the
    highest-confidence detection; afterwards the detection whose centroid
    is nearest the last tracked centroid wins, gated by the association
    radius. The track resumes after dropouts when a detection reappears
    within the radius of the last known centroid.
    """

    def __init__(self, object_class: str, association_radius: float = DEFAULT_ASSOCIATION_RADIUS):
        self.object_class = object_class
        self.association_radius = association_radius
        self.last_known: np.ndarray | None = None
        self.initial_position: np.ndarray | None = None

    def step(self, frame) -> np.ndarray | None:
        """Centroid of the followed instance this frame, or None."""
        candidates = [d for d in frame.detections if d.class_label == self.object_class]
        if not candidates:
            return None
        if self.last_known is None:
            chosen = geometry.bbox_centroid(max(candidates, key=lambda d: d.confidence))
        else:
            centroids = [geometry.bbox_centroid(d) for d in candidates]
            dists = [point_distance(c, self.last_known) for c in centroids]
            k = min(range(len(dists)), key=dists.__getitem__)
            if dists[k] > self.association_radius:
                return None
            chosen = centroids[k]
        self.last_known = chosen
        if self.initial_position is None:
            self.initial_position = chosen
        return chosen


def select_target_object(
    session: Session,
    target: TargetSpec,
    association_radius: float = DEFAULT_ASSOCIATION_RADIUS,
) -> ObjectTrack:
    """Follow one instance of the target class across the whole session."""
    n = len(session.frames)
    frame_index = np.array([f.frame_index for f in session.frames], dtype=int)
    positions = np.full((n, 3), math.nan)
    valid = np.zeros(n, dtype=bool)
    follower = ObjectTrackFollower(target.object_class, association_radius)

    for i, frame in enumerate(session.frames):
        chosen = follower.step(frame)
        if chosen is not None:
            positions[i] = chosen
            valid[i] = True

    if follower.last_known is None:
        raise TargetUnresolvable(f"object class {target.object_class!r} never detected")
    return ObjectTrack(frame_index, positions, valid, follower.initial_position)


def frame_gaze_point(frame, scene: "SceneConfig") -> np.ndarray:
    if frame.head_pose is None:
        raise GazeUndefined("head pose missing")
    if frame.head_pose.confidence < scene.confidence_threshold:
        raise GazeUndefined("head pose below confidence threshold")
    mode_3d = scene.projection_mode == "MODE_3D"
    anchor = geometry.head_anchor(frame, scene.confidence_threshold, require_z=mode_3d)
    ray = GazeRay(anchor, geometry.head_pose_to_direction(frame.head_pose))
    if mode_3d:
        return geometry.gaze_point_on_plane(ray, scene.table_plane)
    return geometry.gaze_point_on_table_line(ray, scene.table_line)


def frame_wrist_point(frame, hand: str, scene: "SceneConfig") -> np.ndarray:
    p = geometry.wrist_position(frame, hand, scene.confidence_threshold)
    if scene.projection_mode == "MODE_2D":
        return vec3(p[0], p[1], 0.0)
    if not math.isfinite(p[2]):
        raise HandUndefined("wrist depth unavailable in 3D mode")
    return p


def _hand_series(session, track, hand, scene) -> MaskedSeries:
    n = len(session.frames)
    values = np.full(n, math.nan)
    valid = np.zeros(n, dtype=bool)
    for i, frame in enumerate(session.frames):
        if not track.valid[i]:
            continue
        try:
            p_h = frame_wrist_point(frame, hand, scene)
        except ProjectionError:
            continue
        values[i] = point_distance(p_h, track.positions[i])
        valid[i] = True
    return MaskedSeries(track.frame_index, values, valid)


def build_signals(session: Session, scene: "SceneConfig", target: TargetSpec) -> SignalSet:
    """Compute d_G, d_H (and d_O for transports) for a repaired session.

    d_G is the distance from the projected gaze point to the gaze target:
    the tracked object centroid for kind="object", the fixed target
    position for kind="position". d_H is wrist-to-object; d_O is
    object-to-target-position (transport only). Frames where gaze, hand,
    or object are undefined stay masked.
    """
    if len(session.frames) == 0:
        raise NoSignalError("no signal: session has no frames")
    track = select_target_object(session, target, scene.association_radius)
    n = len(session.frames)
    frame_index = track.frame_index

    gaze_points = np.full((n, 3), math.nan)
    gaze_ok = np.zeros(n, dtype=bool)
    for i, frame in enumerate(session.frames):
        try:
            gaze_points[i] = frame_gaze_point(frame, scene)
            gaze_ok[i] = True
        except ProjectionError:
            pass

    if target.kind == "object":
        target_points, target_ok = track.positions, track.valid
    else:
        target_points = np.broadcast_to(target.target_position, (n, 3))
        target_ok = np.ones(n, dtype=bool)

    dg_valid = gaze_ok & target_ok
    dg_values = np.full(n, math.nan)
    for i in np.nonzero(dg_valid)[0]:
        dg_values[i] = point_distance(gaze_points[i], target_points[i])
    d_g = MaskedSeries(frame_index, dg_values, dg_valid)

    if scene.hand == "auto":
        left = _hand_series(session, track, "left", scene)
        right = _hand_series(session, track, "right", scene)
        left_min = np.nanmin(left.values) if left.valid.any() else math.inf
        right_min = np.nanmin(right.values) if right.valid.any() else math.inf
        # ties go to the right hand (dominant-hand prior)
        hand, d_h = ("left", left) if left_min < right_min else ("right", right)
    else:
        hand = scene.hand
        d_h = _hand_series(session, track, hand, scene)

    if target.kind == "position":
        do_values = np.full(n, math.nan)
        for i in np.nonzero(track.valid)[0]:
            do_values[i] = point_distance(track.positions[i], target.target_position)
        d_o = MaskedSeries(frame_index, do_values, track.valid.copy())
    else:
        d_o = MaskedSeries.invalid(frame_index)

    if not (d_g.valid.any() or d_h.valid.any() or d_o.valid.any()):
        raise NoSignalError("no signal: all frames invalid")

    units = "pixels" if scene.projection_mode == "MODE_2D" else "millimeters"
    return SignalSet(d_g=d_g, d_h=d_h, d_o=d_o, frame_count=n, units_tag=units, hand=hand)


def smooth(series: MaskedSeries, half_width: int = DEFAULT_SMOOTHING_HALF_WIDTH) -> MaskedSeries:
    """Moving median over the valid samples in [t-half_width, t+half_width].

    Invalid samples are excluded from each window; a sample whose window
    holds no valid input stays invalid. half_width=0 is the identity.
    """
    if half_width < 0:
        raise ValueError("half_width must be >= 0")
    if half_width == 0:
        return series.copy()
    n = len(series)
    out_values = np.full(n, math.nan)
    out_valid = np.zeros(n, dtype=bool)
    for t in range(n):
        lo = max(0, t - half_width)
        hi = min(n, t + half_width + 1)
        window_valid = series.valid[lo:hi]
        if window_valid.any():
            out_values[t] = median_of(series.values[lo:hi][window_valid])
            out_valid[t] = True
    return MaskedSeries(series.frame_index.copy(), out_values, out_valid)


def smooth_signals(signals: SignalSet, half_width: int) -> SignalSet:
    """Apply the moving median to all three series of a SignalSet."""
    return SignalSet(
        d_g=smooth(signals.d_g, half_width),
        d_h=smooth(signals.d_h, half_width),
        d_o=smooth(signals.d_o, half_width),
        frame_count=signals.frame_count,
        units_tag=signals.units_tag,
        hand=signals.hand,
    )
