"""Geometric core: head-axis rays, table projection, and point extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import Detection, FrameRecord, HeadPose

Vec3 = np.ndarray  # float64 array of shape (3,)

# Facial landmarks eligible as the gaze-ray origin, in fallback order.
FACIAL_KEYPOINT_IDS = ("nose", "l_eye", "r_eye", "l_ear", "r_ear")

UNIT_NORM_TOL = 1e-9
RAY_PARALLEL_TOL = 1e-9
DEFAULT_CONFIDENCE_THRESHOLD = 0.2


class ProjectionError(ValueError):
    """A frame yields no usable geometric sample; callers mask the frame."""


class GazeUndefined(ProjectionError):
    """No facial keypoint qualifies as a gaze-ray origin this frame."""


class HandUndefined(ProjectionError):
    """The requested wrist keypoint is absent or below threshold."""


class RayParallelToTable(ProjectionError):
    """The gaze ray never meets the table surface."""


class GazeAwayFromTable(ProjectionError):
    """The table lies behind the head along the gaze direction."""


def vec3(x: float, y: float, z: float = 0.0) -> Vec3:
    return np.array([float(x), float(y), float(z)])


@dataclass
class Plane:
    """Table surface as {p : normal . p = offset} in the tagged frame.

    The normal is rescaled to unit length on construction (the offset is
    rescaled with it, so the plane itself is unchanged).
    """

    normal: np.ndarray
    offset: float
    frame_tag: str = "camera"

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or not np.all(np.isfinite(n)):
            raise ValueError("plane normal must be a finite 3-vector")
        norm = float(np.linalg.norm(n))
        if norm < 1e-12:
            raise ValueError("plane normal must be nonzero")
        self.normal = n / norm
        self.offset = float(self.offset) / norm


@dataclass
class TableLine:
    """Table edge in image coordinates for 2D projection: two distinct points."""

    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)[:2]
        self.p1 = np.asarray(self.p1, dtype=float)[:2]
        if not (np.all(np.isfinite(self.p0)) and np.all(np.isfinite(self.p1))):
            raise ValueError("table line points must be finite")
        if np.allclose(self.p0, self.p1):
            raise ValueError("table line points must be distinct")


@dataclass
class GazeRay:
    """Gaze proxy: origin on the head plus the unit forward head axis."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        norm = math.sqrt(float(d[0]) ** 2 + float(d[1]) ** 2 + float(d[2]) ** 2)
        if norm < 1e-12:
            raise ValueError("ray direction must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            d = d / norm
        self.direction = d


def head_pose_to_direction(pose: HeadPose) -> Vec3:
    """Forward head-axis versor for yaw/pitch/roll degrees.

    Reference forward is (0, 0, 1) in camera-facing coordinates (x right,
    y down, z into the scene). Intrinsic rotation order is yaw about the
    vertical axis, then pitch about the lateral axis, then roll about the
    forward axis itself; roll therefore never moves the forward versor.
    """
    yaw = math.radians(pose.yaw)
    pitch = math.radians(pose.pitch)
    return np.array(
        [
            math.sin(yaw) * math.cos(pitch),
            -math.sin(pitch),
            math.cos(yaw) * math.cos(pitch),
        ]
    )


def head_anchor(
    frame: FrameRecord,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    require_z: bool = False,
) -> Vec3:
    """Gaze-ray origin: the nose if usable, else the confidence-weighted
    mean of the remaining facial keypoints.

    With require_z, keypoints lacking a depth value are not eligible.
    Raises GazeUndefined when no facial keypoint qualifies.
    """
    usable = {}
    for kp in frame.keypoints:
        if kp.id not in FACIAL_KEYPOINT_IDS or kp.confidence < confidence_threshold:
            continue
        if require_z and not math.isfinite(kp.z):
            continue
        prev = usable.get(kp.id)
        if prev is None or kp.confidence > prev.confidence:
            usable[kp.id] = kp

    if "nose" in usable:
        return usable["nose"].position
    if not usable:
        raise GazeUndefined("no facial keypoint above threshold")

    weights = np.array([kp.confidence for kp in usable.values()])
    points = np.stack([kp.position for kp in usable.values()])
    if weights.sum() <= 0.0:
        raise GazeUndefined("facial keypoint confidences sum to zero")
    return (weights[:, None] * points).sum(axis=0) / weights.sum()


def gaze_point_on_plane(ray: GazeRay, table: Plane) -> Vec3:
    """Intersection of the gaze ray with the table plane (3D mode).

    The returned point is origin + t * direction with t > 0 and satisfies
    the plane equation to within 1e-6.
    """
    nx, ny, nz = float(table.normal[0]), float(table.normal[1]), float(table.normal[2])
    ox, oy, oz = float(ray.origin[0]), float(ray.origin[1]), float(ray.origin[2])
    dx, dy, dz = float(ray.direction[0]), float(ray.direction[1]), float(ray.direction[2])
    denom = nx * dx + ny * dy + nz * dz
    if abs(denom) < RAY_PARALLEL_TOL:
        raise RayParallelToTable("ray parallel to table")
    t = (table.offset - (nx * ox + ny * oy + nz * oz)) / denom
    if t <= 0.0:
        raise GazeAwayFromTable("gaze away from table")
    return np.array([ox + t * dx, oy + t * dy, oz + t * dz])


def gaze_point_on_table_line(ray: GazeRay, line: TableLine) -> Vec3:
    """Intersection of the image-projected forward axis with the table line
    (2D mode). Returns an image point with z = 0.
    """
    ox, oy = float(ray.origin[0]), float(ray.origin[1])
    dx, dy = float(ray.direction[0]), float(ray.direction[1])
    if math.hypot(dx, dy) < RAY_PARALLEL_TOL:
        raise GazeUndefined("forward axis has no image-plane component")
    lx, ly = float(line.p1[0] - line.p0[0]), float(line.p1[1] - line.p0[1])
    denom = dx * ly - dy * lx
    if abs(denom) < RAY_PARALLEL_TOL * math.hypot(lx, ly):
        raise RayParallelToTable("ray parallel to table")
    rx, ry = float(line.p0[0]) - ox, float(line.p0[1]) - oy
    t = (rx * ly - ry * lx) / denom
    if t <= 0.0:
        raise GazeAwayFromTable("gaze away from table")
    return np.array([ox + t * dx, oy + t * dy, 0.0])


def bbox_centroid(d: Detection) -> Vec3:
    """Centroid of a detection box as an image-frame point (z = 0)."""
    return vec3((d.x0 + d.x1) / 2.0, (d.y0 + d.y1) / 2.0, 0.0)


def wrist_position(
    frame: FrameRecord,
    hand: str,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
) -> Vec3:
    """Position of the requested wrist keypoint ("left" or "right").

    Returns the stored keypoint position verbatim (z may be NaN when depth
    is unavailable). Raises HandUndefined when the keypoint is missing or
    below threshold.
    """
    if hand not in ("left", "right"):
        raise ValueError(f"hand must be 'left' or 'right', got {hand!r}")
    wanted = "l_wrist" if hand == "left" else "r_wrist"
    best = None
    for kp in frame.keypoints:
        if kp.id != wanted or kp.confidence < confidence_threshold:
            continue
        if best is None or kp.confidence > best.confidence:
            best = kp
    if best is None:
        raise HandUndefined(f"{wanted} absent or below threshold")
    return best.position
