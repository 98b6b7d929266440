"""Validation of the engine's line-delimited session schema.

The adapter validates everything it is about to write against the session
stream contract (header line, then one frame object per line) before any
bytes hit disk. Deliberately self-contained: the engine stays behind the
file/pipe boundary.
"""

from __future__ import annotations

import json
import math


class SchemaError(ValueError):
    """The produced session would violate the stream schema."""


def _num(doc, key, line, lo=None, hi=None):
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"line {line}: '{key}' must be a number")
    if not math.isfinite(float(value)):
        raise SchemaError(f"line {line}: '{key}' must be finite")
    if lo is not None and value < lo or hi is not None and value > hi:
        raise SchemaError(f"line {line}: '{key}'={value} outside [{lo},{hi}]")
    return float(value)


def validate_header(doc: dict, line: int = 1) -> float:
    """Check the header object; returns the declared fps."""
    if doc.get("type") != "header":
        raise SchemaError(f"line {line}: first record must be the header")
    if not isinstance(doc.get("session_id"), str) or not doc["session_id"]:
        raise SchemaError(f"line {line}: 'session_id' must be a nonempty string")
    fps = _num(doc, "fps", line)
    if fps <= 0:
        raise SchemaError(f"line {line}: 'fps' must be positive")
    label = doc.get("action_label")
    if label is not None and not isinstance(label, str):
        raise SchemaError(f"line {line}: 'action_label' must be a string")
    return fps


def validate_frame(doc: dict, line: int) -> int:
    """Check one frame object; returns its frame_index."""
    if doc.get("type") != "frame":
        raise SchemaError(f"line {line}: expected a frame record")
    idx = doc.get("frame_index")
    if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
        raise SchemaError(f"line {line}: 'frame_index' must be a nonnegative integer")
    _num(doc, "timestamp", line)
    for kp in doc.get("keypoints", []):
        if not isinstance(kp.get("id"), str):
            raise SchemaError(f"line {line}: keypoint 'id' must be a string")
        _num(kp, "x", line)
        _num(kp, "y", line)
        if "z" in kp and kp["z"] is not None:
            _num(kp, "z", line)
        _num(kp, "conf", line, 0.0, 1.0)
    for det in doc.get("detections", []):
        if not isinstance(det.get("class"), str):
            raise SchemaError(f"line {line}: detection 'class' must be a string")
        x0, y0 = _num(det, "x0", line), _num(det, "y0", line)
        x1, y1 = _num(det, "x1", line), _num(det, "y1", line)
        if x0 > x1 or y0 > y1:
            raise SchemaError(f"line {line}: detection box not min/max ordered")
        _num(det, "conf", line, 0.0, 1.0)
    pose = doc.get("head_pose")
    if pose is not None:
        _num(pose, "yaw", line, -180.0, 180.0)
        _num(pose, "pitch", line, -90.0, 90.0)
        _num(pose, "roll", line, -180.0, 180.0)
        _num(pose, "conf", line, 0.0, 1.0)
    return idx


def validate_session_docs(docs: list[dict]) -> None:
    """Validate a whole session (header first) before serialization."""
    if not docs:
        raise SchemaError("session is empty")
    fps = validate_header(docs[0], line=1)
    prev_idx = None
    first = None
    for offset, doc in enumerate(docs[1:], start=2):
        idx = validate_frame(doc, line=offset)
        ts = float(doc["timestamp"])
        if prev_idx is not None and idx <= prev_idx:
            raise SchemaError(f"line {offset}: frame_index {idx} not strictly increasing")
        if first is None:
            first = (idx, ts)
        drift = abs((ts - first[1]) - (idx - first[0]) / fps)
        if drift > 1.0 / fps + 1e-9:
            raise SchemaError(f"line {offset}: timestamp {ts} inconsistent with fps {fps}")
        prev_idx = idx


def dumps_line(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"))
