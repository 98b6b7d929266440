import json
import math

import pytest

from headlead.ingest import Detection, FrameRecord, HeadPose, Keypoint, Session


def kp(kp_id, x, y, z=math.nan, conf=0.9):
    return Keypoint(kp_id, float(x), float(y), float(z), conf)


def det(cls, x0, y0, x1, y1, conf=0.9):
    return Detection(cls, float(x0), float(y0), float(x1), float(y1), conf)


def frame(idx, fps=30.0, keypoints=(), detections=(), head_pose=None):
    return FrameRecord(
        frame_index=idx,
        timestamp=idx / fps,
        keypoints=tuple(keypoints),
        detections=tuple(detections),
        head_pose=head_pose,
    )


def session(frames, session_id="test", fps=30.0, action_label=None):
    return Session(session_id, fps, action_label, tuple(frames))


def header_line(session_id="test", fps=30.0, action_label=None):
    doc = {"type": "header", "session_id": session_id, "fps": fps}
    if action_label is not None:
        doc["action_label"] = action_label
    return json.dumps(doc)


def frame_line(idx, fps=30.0, keypoints=(), detections=(), head_pose=None, **extra):
    doc = {
        "type": "frame",
        "frame_index": idx,
        "timestamp": idx / fps,
        "keypoints": list(keypoints),
        "detections": list(detections),
    }
    if head_pose is not None:
        doc["head_pose"] = head_pose
    doc.update(extra)
    return json.dumps(doc)
