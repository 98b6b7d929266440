"""Detector backends behind one exporter interface.

Heavyweight neural detectors can be plugged in by registering an object
with the same three-method surface; the built-in backends are classic-CV
implementations that run with no model weights: a color-marker body-pose
detector, an HSV-threshold object detector, and a facial-geometry head
pose estimator working from the eye/nose keypoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import cv2
import numpy as np


class AdapterError(RuntimeError):
    """Backend construction or model loading failed."""


@dataclass(frozen=True)
class KeypointObs:
    id: str
    x: float
    y: float
    z: float | None
    conf: float


@dataclass(frozen=True)
class BoxObs:
    class_label: str
    x0: float
    y0: float
    x1: float
    y1: float
    conf: float


@dataclass(frozen=True)
class HeadPoseObs:
    yaw: float
    pitch: float
    roll: float
    conf: float


class PoseBackend(Protocol):
    landmark_ids: tuple[str, ...]

    def detect(self, frame_bgr: np.ndarray) -> list[KeypointObs]: ...


class ObjectBackend(Protocol):
    def detect(self, frame_bgr: np.ndarray) -> list[BoxObs]: ...


class HeadPoseBackend(Protocol):
    def estimate(self, frame_bgr: np.ndarray, keypoints: list[KeypointObs]) -> HeadPoseObs | None: ...


# BGR colors of the body markers the classic-CV pose backend looks for.
MARKER_COLORS = {
    "nose": (0, 0, 255),
    "left_eye": (0, 255, 0),
    "right_eye": (255, 0, 0),
    "left_ear": (0, 255, 255),
    "right_ear": (255, 0, 255),
    "left_wrist": (255, 255, 0),
    "right_wrist": (0, 128, 255),
}
MARKER_TOLERANCE = 40
MARKER_EXPECTED_AREA = 40.0  # px^2 of a fully visible marker dot


class MarkerPoseBackend:
    """Finds solid color-marker dots and reports their centroids."""

    landmark_ids = tuple(MARKER_COLORS)

    def __init__(self, min_area: float = 6.0):
        self.min_area = min_area

    def detect(self, frame_bgr: np.ndarray) -> list[KeypointObs]:
        found = []
        for kp_id, bgr in MARKER_COLORS.items():
            lo = np.array([max(0, c - MARKER_TOLERANCE) for c in bgr], dtype=np.uint8)
            hi = np.array([min(255, c + MARKER_TOLERANCE) for c in bgr], dtype=np.uint8)
            mask = cv2.inRange(frame_bgr, lo, hi)
            moments = cv2.moments(mask, binaryImage=True)
            area = moments["m00"]
            if area < self.min_area:
                continue
            cx = moments["m10"] / area
            cy = moments["m01"] / area
            conf = min(1.0, area / MARKER_EXPECTED_AREA)
            found.append(KeypointObs(kp_id, float(cx), float(cy), None, float(conf)))
        return found


class HsvObjectBackend:
    """Detects one object class as the largest blob of a known hue band."""

    def __init__(
        self,
        class_label: str = "bottle",
        hsv_low: tuple = (100, 120, 40),
        hsv_high: tuple = (130, 255, 200),
        min_area: float = 120.0,
    ):
        self.class_label = class_label
        self.hsv_low = np.array(hsv_low, dtype=np.uint8)
        self.hsv_high = np.array(hsv_high, dtype=np.uint8)
        self.min_area = min_area

    def detect(self, frame_bgr: np.ndarray) -> list[BoxObs]:
        hsv = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2HSV)
        mask = cv2.inRange(hsv, self.hsv_low, self.hsv_high)
        contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
        boxes = []
        for contour in contours:
            area = cv2.contourArea(contour)
            if area < self.min_area:
                continue
            x, y, w, h = cv2.boundingRect(contour)
            conf = min(1.0, area / float(w * h)) if w * h else 0.0
            boxes.append(BoxObs(self.class_label, float(x), float(y), float(x + w), float(y + h), conf))
        boxes.sort(key=lambda b: (b.x1 - b.x0) * (b.y1 - b.y0), reverse=True)
        return boxes[:1]


# Facial-geometry model constants: nose offset from the eye midpoint,
# normalized by the interocular distance, maps to yaw/pitch.
YAW_SIN_PER_OFFSET = 1.8     # sin(yaw) = K * (nose_x - mid_x) / interocular
PITCH_NEUTRAL_RATIO = 0.45   # (nose_y - mid_y) / interocular for a level head
PITCH_DEG_PER_RATIO = 90.0


class FacialGeometryHeadPoseBackend:
    """Head orientation from the nose's offset against the eye pair.

    A coarse geometric stand-in for a neural head-pose model: roll from
    the eye-line slope, yaw from the lateral nose offset, pitch from the
    vertical nose drop, each normalized by the interocular distance.
    """

    def estimate(self, frame_bgr: np.ndarray, keypoints: list[KeypointObs]) -> HeadPoseObs | None:
        by_id = {kp.id: kp for kp in keypoints}
        if not {"nose", "left_eye", "right_eye"} <= set(by_id):
            return None
        nose, left, right = by_id["nose"], by_id["left_eye"], by_id["right_eye"]
        interocular = math.hypot(right.x - left.x, right.y - left.y)
        if interocular < 1e-6:
            return None
        roll = math.degrees(math.atan2(right.y - left.y, right.x - left.x))
        mid_x = (left.x + right.x) / 2.0
        mid_y = (left.y + right.y) / 2.0
        sin_yaw = YAW_SIN_PER_OFFSET * (nose.x - mid_x) / interocular
        yaw = math.degrees(math.asin(max(-1.0, min(1.0, sin_yaw))))
        ratio = (nose.y - mid_y) / interocular
        pitch = -PITCH_DEG_PER_RATIO * (ratio - PITCH_NEUTRAL_RATIO)
        pitch = max(-90.0, min(90.0, pitch))
        conf = min(nose.conf, left.conf, right.conf)
        return HeadPoseObs(yaw, pitch, roll, conf)


POSE_BACKENDS = {"marker": MarkerPoseBackend}
OBJECT_BACKENDS = {"hsv": HsvObjectBackend}
HEAD_BACKENDS = {"facial-geometry": FacialGeometryHeadPoseBackend}


def make_backend(registry: dict, name: str, kind: str):
    try:
        factory = registry[name]
    except KeyError:
        raise AdapterError(
            f"unknown {kind} backend {name!r}; available: {sorted(registry)}"
        ) from None
    return factory()
