"""Video-to-session export: run the backends frame by frame and serialize."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

import cv2

from .backends import (
    AdapterError,
    HEAD_BACKENDS,
    OBJECT_BACKENDS,
    POSE_BACKENDS,
    make_backend,
)
from .schema import SchemaError, dumps_line, validate_session_docs

# Backend landmark vocabulary -> engine keypoint ids. Must cover every id
# a pose backend declares; checked before any video work starts.
KEYPOINT_ID_MAP = {
    "nose": "nose",
    "left_eye": "l_eye",
    "right_eye": "r_eye",
    "left_ear": "l_ear",
    "right_ear": "r_ear",
    "left_wrist": "l_wrist",
    "right_wrist": "r_wrist",
}


@dataclass
class AdapterConfig:
    video_path: str
    out_path: str
    pose_backend: str = "marker"
    object_backend: str = "hsv"
    head_backend: str = "facial-geometry"
    min_keypoint_conf: float = 0.2
    min_detection_conf: float = 0.2
    fps_override: float | None = None
    session_id: str | None = None
    action_label: str | None = None

    def __post_init__(self):
        for name in ("min_keypoint_conf", "min_detection_conf"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise AdapterError(f"{name} must be in [0,1], got {value}")
        if self.fps_override is not None and self.fps_override <= 0:
            raise AdapterError("fps_override must be positive")


def _check_id_mapping(pose_backend) -> None:
    unmapped = [kp_id for kp_id in pose_backend.landmark_ids if kp_id not in KEYPOINT_ID_MAP]
    if unmapped:
        raise AdapterError(f"no keypoint-id mapping for backend landmarks: {unmapped}")


def build_session_docs(cfg: AdapterConfig) -> list[dict]:
    """Decode the video, run all backends, and assemble the session records."""
    pose = make_backend(POSE_BACKENDS, cfg.pose_backend, "pose")
    objects = make_backend(OBJECT_BACKENDS, cfg.object_backend, "object")
    head = make_backend(HEAD_BACKENDS, cfg.head_backend, "head-pose")
    _check_id_mapping(pose)

    capture = cv2.VideoCapture(cfg.video_path)
    if not capture.isOpened():
        capture.release()
        raise AdapterError(f"cannot decode video: {cfg.video_path}")
    fps = cfg.fps_override or float(capture.get(cv2.CAP_PROP_FPS) or 0.0)
    if fps <= 0:
        capture.release()
        raise AdapterError("video carries no fps metadata; pass an fps override")

    session_id = cfg.session_id or os.path.splitext(os.path.basename(cfg.video_path))[0]
    header = {"type": "header", "session_id": session_id, "fps": fps}
    if cfg.action_label is not None:
        header["action_label"] = cfg.action_label

    docs = [header]
    index = 0
    while True:
        ok, frame = capture.read()
        if not ok:
            break
        observations = pose.detect(frame)
        keypoints = []
        for obs in observations:
            if obs.conf < cfg.min_keypoint_conf:
                continue
            entry = {"id": KEYPOINT_ID_MAP[obs.id], "x": obs.x, "y": obs.y}
            if obs.z is not None:
                entry["z"] = obs.z
            entry["conf"] = obs.conf
            keypoints.append(entry)
        detections = [
            {"class": b.class_label, "x0": b.x0, "y0": b.y0, "x1": b.x1, "y1": b.y1, "conf": b.conf}
            for b in objects.detect(frame)
            if b.conf >= cfg.min_detection_conf
        ]
        doc = {
            "type": "frame",
            "frame_index": index,
            "timestamp": index / fps,
            "keypoints": keypoints,
            "detections": detections,
        }
        pose_obs = head.estimate(frame, observations)
        if pose_obs is not None:
            doc["head_pose"] = {
                "yaw": pose_obs.yaw,
                "pitch": pose_obs.pitch,
                "roll": pose_obs.roll,
                "conf": pose_obs.conf,
            }
        docs.append(doc)
        index += 1
    capture.release()
    return docs


def export_session(cfg: AdapterConfig) -> tuple[str, int]:
    """Export one video to a schema-valid session file.

    Every record is validated against the stream schema before anything is
    written. Returns (out_path, frame_count); out_path "-" writes to stdout
    so the export can pipe straight into the engine's stream command.
    """
    docs = build_session_docs(cfg)
    try:
        validate_session_docs(docs)
    except SchemaError as exc:
        raise AdapterError(f"refusing to write invalid session: {exc}") from exc
    lines = "".join(dumps_line(doc) + "\n" for doc in docs)
    if cfg.out_path == "-":
        sys.stdout.write(lines)
        sys.stdout.flush()
    else:
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            fh.write(lines)
    return cfg.out_path, len(docs) - 1
