"""Line-delimited session parsing, validation, and gap repair.

Stream format (UTF-8, one JSON object per line):

    {"type":"header","session_id":str,"fps":number,"action_label":str?}
    {"type":"frame","frame_index":int,"timestamp":number,
     "keypoints":[{"id":str,"x":number,"y":number,"z":number?,"conf":number}],
     "detections":[{"class":str,"x0":number,"y0":number,"x1":number,"y1":number,"conf":number}],
     "head_pose":{"yaw":number,"pitch":number,"roll":number,"conf":number}?}

Unknown fields are ignored. Parsing is single pass and keeps O(1) state
beyond the output itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import IO, Iterable, Iterator, Union

import numpy as np

DEFAULT_MAX_GAP = 5  # frames (~167 ms at 30 fps)

# Keypoint ids the analysis relies on; arbitrary additional ids are allowed.
KNOWN_KEYPOINT_IDS = ("nose", "l_eye", "r_eye", "l_ear", "r_ear", "l_wrist", "r_wrist")


class ParseError(ValueError):
    """Malformed or invalid input; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def wrap_angle_deg(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]; exact no-op when already there."""
    if -180.0 < angle <= 180.0:
        return angle
    wrapped = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if wrapped == -180.0 else wrapped


def interp_angle_deg(a: float, b: float, frac: float) -> float:
    """Interpolate between two angles along the shortest arc of the circle."""
    delta = (b - a + 180.0) % 360.0 - 180.0
    return wrap_angle_deg(a + frac * delta)


@dataclass(frozen=True)
class Keypoint:
    """A body or face landmark. z is NaN when depth is unavailable."""

    id: str
    x: float
    y: float
    z: float
    confidence: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def has_z(self) -> bool:
        return math.isfinite(self.z)


@dataclass(frozen=True)
class Detection:
    class_label: str
    x0: float
    y0: float
    x1: float
    y1: float
    confidence: float


@dataclass(frozen=True)
class HeadPose:
    """Head orientation as yaw/pitch/roll in degrees."""

    yaw: float
    pitch: float
    roll: float
    confidence: float


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    timestamp: float
    keypoints: tuple[Keypoint, ...]
    detections: tuple[Detection, ...]
    head_pose: HeadPose | None


@dataclass(frozen=True)
class Session:
    """One recorded action video's worth of per-frame perception records."""

    session_id: str
    fps: float
    action_label: str | None
    frames: tuple[FrameRecord, ...]

    def __len__(self) -> int:
        return len(self.frames)


def _require(obj: dict, key: str, line: int):
    if key not in obj:
        raise ParseError(f"missing mandatory field '{key}'", line)
    return obj[key]


def _number(value, field: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"field '{field}' must be a number", line)
    v = float(value)
    if not math.isfinite(v):
        raise ParseError(f"field '{field}' must be finite", line)
    return v


def _confidence(value, field: str, line: int) -> float:
    conf = _number(value, field, line)
    if not 0.0 <= conf <= 1.0:
        raise ParseError(f"field '{field}' out of range [0,1]: {conf}", line)
    return conf


def _parse_keypoint(obj, line: int) -> Keypoint:
    if not isinstance(obj, dict):
        raise ParseError("keypoint entry must be an object", line)
    kp_id = _require(obj, "id", line)
    if not isinstance(kp_id, str):
        raise ParseError("keypoint 'id' must be a string", line)
    x = _number(_require(obj, "x", line), "x", line)
    y = _number(_require(obj, "y", line), "y", line)
    z = obj.get("z")
    z_val = math.nan if z is None else _number(z, "z", line)
    conf = _confidence(_require(obj, "conf", line), "conf", line)
    return Keypoint(kp_id, x, y, z_val, conf)


def _parse_detection(obj, line: int) -> Detection:
    if not isinstance(obj, dict):
        raise ParseError("detection entry must be an object", line)
    cls = _require(obj, "class", line)
    if not isinstance(cls, str):
        raise ParseError("detection 'class' must be a string", line)
    x0 = _number(_require(obj, "x0", line), "x0", line)
    y0 = _number(_require(obj, "y0", line), "y0", line)
    x1 = _number(_require(obj, "x1", line), "x1", line)
    y1 = _number(_require(obj, "y1", line), "y1", line)
    if x0 > x1 or y0 > y1:
        raise ParseError(f"detection box not min/max ordered: ({x0},{y0})-({x1},{y1})", line)
    conf = _confidence(_require(obj, "conf", line), "conf", line)
    return Detection(cls, x0, y0, x1, y1, conf)


def _parse_head_pose(obj, line: int) -> HeadPose:
    if not isinstance(obj, dict):
        raise ParseError("head_pose must be an object", line)
    yaw = wrap_angle_deg(_number(_require(obj, "yaw", line), "yaw", line))
    pitch = wrap_angle_deg(_number(_require(obj, "pitch", line), "pitch", line))
    roll = wrap_angle_deg(_number(_require(obj, "roll", line), "roll", line))
    if not -90.0 <= pitch <= 90.0:
        raise ParseError(f"field 'pitch' out of range [-90,90] after normalization: {pitch}", line)
    conf = _confidence(_require(obj, "conf", line), "conf", line)
    return HeadPose(yaw, pitch, roll, conf)


def parse_frame_payload(obj: dict, line: int) -> FrameRecord:
    """Validate one decoded frame object. Raises ParseError with context."""
    idx = _require(obj, "frame_index", line)
    if isinstance(idx, bool) or not isinstance(idx, int):
        raise ParseError("field 'frame_index' must be an integer", line)
    if idx < 0:
        raise ParseError(f"field 'frame_index' must be nonnegative: {idx}", line)
    ts = _number(_require(obj, "timestamp", line), "timestamp", line)

    keypoints = obj.get("keypoints") or []
    detections = obj.get("detections") or []
    if not isinstance(keypoints, list):
        raise ParseError("field 'keypoints' must be a list", line)
    if not isinstance(detections, list):
        raise ParseError("field 'detections' must be a list", line)

    head_pose = obj.get("head_pose")
    return FrameRecord(
        frame_index=idx,
        timestamp=ts,
        keypoints=tuple(_parse_keypoint(k, line) for k in keypoints),
        detections=tuple(_parse_detection(d, line) for d in detections),
        head_pose=None if head_pose is None else _parse_head_pose(head_pose, line),
    )


def decode_line(text: str, line: int) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line) from exc
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", line)
    if "type" not in obj:
        raise ParseError("record missing 'type'", line)
    return obj


def parse_header_payload(obj: dict, line: int) -> tuple[str, float, str | None]:
    session_id = _require(obj, "session_id", line)
    if not isinstance(session_id, str) or not session_id:
        raise ParseError("header 'session_id' must be a nonempty string", line)
    fps = _number(_require(obj, "fps", line), "fps", line)
    if fps <= 0:
        raise ParseError(f"header 'fps' must be positive: {fps}", line)
    action = obj.get("action_label")
    if action is not None and not isinstance(action, str):
        raise ParseError("header 'action_label' must be a string", line)
    return session_id, fps, action


class FrameOrderChecker:
    """Incremental ordering/timing validation shared by batch and stream parsing."""

    def __init__(self, fps: float):
        self.fps = fps
        self._first: tuple[int, float] | None = None
        self._prev: tuple[int, float] | None = None

    def check(self, frame: FrameRecord, line: int) -> None:
        idx, ts = frame.frame_index, frame.timestamp
        if self._prev is not None:
            prev_idx, prev_ts = self._prev
            if idx == prev_idx:
                raise ParseError(f"duplicate frame_index {idx}", line)
            if idx < prev_idx:
                raise ParseError(f"frame_index not increasing: {idx} after {prev_idx}", line)
            if ts < prev_ts:
                raise ParseError(f"non-monotone timestamp: {ts} after {prev_ts}", line)
        if self._first is None:
            self._first = (idx, ts)
        first_idx, first_ts = self._first
        expected = (idx - first_idx) / self.fps
        # one frame period of slack against the declared fps
        if abs((ts - first_ts) - expected) > 1.0 / self.fps + 1e-9:
            raise ParseError(
                f"timestamp {ts} inconsistent with frame_index {idx} at {self.fps} fps",
                line,
            )
        self._prev = (idx, ts)


def _iter_lines(stream) -> Iterator[str]:
    if isinstance(stream, (str, bytes)):
        raw = stream.decode("utf-8") if isinstance(stream, bytes) else stream
        yield from raw.splitlines()
        return
    for line in stream:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def parse_session(stream: Union[str, bytes, IO, Iterable[str]]) -> Session:
    """Parse a line-delimited session stream into a Session.

    Accepts a text/byte stream, an iterable of lines, or whole content as
    str/bytes. The first nonempty line must be the header. Frames must have
    strictly increasing frame_index and timestamps consistent with the
    declared fps (within one frame period).
    """
    header = None
    checker = None
    frames: list[FrameRecord] = []
    line_no = 0
    for raw in _iter_lines(stream):
        line_no += 1
        text = raw.strip()
        if not text:
            continue
        obj = decode_line(text, line_no)
        if header is None:
            if obj["type"] != "header":
                raise ParseError("first record must be the session header", line_no)
            header = parse_header_payload(obj, line_no)
            checker = FrameOrderChecker(header[1])
            continue
        if obj["type"] == "header":
            raise ParseError("duplicate header record", line_no)
        if obj["type"] != "frame":
            # unknown record types are ignored, mirroring unknown fields
            continue
        frame = parse_frame_payload(obj, line_no)
        checker.check(frame, line_no)
        frames.append(frame)

    if header is None:
        raise ParseError("missing mandatory header (session_id, fps)", max(line_no, 1))
    session_id, fps, action_label = header
    return Session(session_id, fps, action_label, tuple(frames))


def frame_to_payload(frame: FrameRecord) -> dict:
    kps = []
    for kp in frame.keypoints:
        entry = {"id": kp.id, "x": kp.x, "y": kp.y}
        if kp.has_z:
            entry["z"] = kp.z
        entry["conf"] = kp.confidence
        kps.append(entry)
    dets = [
        {"class": d.class_label, "x0": d.x0, "y0": d.y0, "x1": d.x1, "y1": d.y1, "conf": d.confidence}
        for d in frame.detections
    ]
    payload = {
        "type": "frame",
        "frame_index": frame.frame_index,
        "timestamp": frame.timestamp,
        "keypoints": kps,
        "detections": dets,
    }
    if frame.head_pose is not None:
        hp = frame.head_pose
        payload["head_pose"] = {"yaw": hp.yaw, "pitch": hp.pitch, "roll": hp.roll, "conf": hp.confidence}
    return payload


def iter_session_lines(session: Session) -> Iterator[str]:
    header = {"type": "header", "session_id": session.session_id, "fps": session.fps}
    if session.action_label is not None:
        header["action_label"] = session.action_label
    yield json.dumps(header, separators=(",", ":"))
    for frame in session.frames:
        yield json.dumps(frame_to_payload(frame), separators=(",", ":"))


def serialize_session(session: Session) -> str:
    """Inverse of parse_session: parse(serialize(s)) == s field by field."""
    return "\n".join(iter_session_lines(session)) + "\n"


def write_session(session: Session, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in iter_session_lines(session):
            fh.write(line + "\n")


# --- Gap repair ----------------------------------------------------------------


def _fill_head_pose(a: HeadPose, b: HeadPose, frac: float) -> HeadPose:
    return HeadPose(
        yaw=interp_angle_deg(a.yaw, b.yaw, frac),
        pitch=interp_angle_deg(a.pitch, b.pitch, frac),
        roll=interp_angle_deg(a.roll, b.roll, frac),
        confidence=a.confidence + frac * (b.confidence - a.confidence),
    )


def _fill_keypoint(a: Keypoint, b: Keypoint, frac: float) -> Keypoint:
    z = a.z + frac * (b.z - a.z) if (a.has_z and b.has_z) else math.nan
    return Keypoint(
        id=a.id,
        x=a.x + frac * (b.x - a.x),
        y=a.y + frac * (b.y - a.y),
        z=z,
        confidence=a.confidence + frac * (b.confidence - a.confidence),
    )


def _fill_detection(a: Detection, b: Detection, frac: float) -> Detection:
    return Detection(
        class_label=a.class_label,
        x0=a.x0 + frac * (b.x0 - a.x0),
        y0=a.y0 + frac * (b.y0 - a.y0),
        x1=a.x1 + frac * (b.x1 - a.x1),
        y1=a.y1 + frac * (b.y1 - a.y1),
        confidence=a.confidence + frac * (b.confidence - a.confidence),
    )


def repair_gaps(session: Session, max_gap: int = DEFAULT_MAX_GAP) -> Session:
    """Fill detector dropouts of at most max_gap consecutive frames.

    Missing head poses, keypoints, and single-instance detections are
    interpolated linearly between the surrounding present frames; angles
    are interpolated along the shortest arc. Longer gaps and gaps at the
    session boundaries are left missing (downstream masking carries the
    information). The input session is never modified; the repair is
    idempotent, and max_gap=0 returns an equal session.
    """
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    n = len(session.frames)
    if n == 0 or max_gap == 0:
        return session

    frames = list(session.frames)
    new_head: dict[int, HeadPose] = {}
    new_kps: dict[int, list[Keypoint]] = {}
    new_dets: dict[int, list[Detection]] = {}

    present_hp = [i for i, f in enumerate(frames) if f.head_pose is not None]
    for left, right in zip(present_hp, present_hp[1:]):
        gap = right - left - 1
        if 0 < gap <= max_gap:
            a, b = frames[left].head_pose, frames[right].head_pose
            for pos in range(left + 1, right):
                new_head[pos] = _fill_head_pose(a, b, (pos - left) / (right - left))

    kp_ids = {kp.id for f in frames for kp in f.keypoints}
    for kp_id in sorted(kp_ids):
        by_frame = {}
        for i, f in enumerate(frames):
            best = None
            for kp in f.keypoints:
                if kp.id == kp_id and (best is None or kp.confidence > best.confidence):
                    best = kp
            if best is not None:
                by_frame[i] = best
        present = sorted(by_frame)
        for left, right in zip(present, present[1:]):
            gap = right - left - 1
            if 0 < gap <= max_gap:
                a, b = by_frame[left], by_frame[right]
                for pos in range(left + 1, right):
                    new_kps.setdefault(pos, []).append(
                        _fill_keypoint(a, b, (pos - left) / (right - left))
                    )

    classes = {d.class_label for f in frames for d in f.detections}
    for cls in sorted(classes):
        by_frame = {
            i: [d for d in f.detections if d.class_label == cls]
            for i, f in enumerate(frames)
        }
        present = sorted(i for i, ds in by_frame.items() if ds)
        for left, right in zip(present, present[1:]):
            gap = right - left - 1
            # interpolation is only well defined for a single instance
            if 0 < gap <= max_gap and len(by_frame[left]) == 1 and len(by_frame[right]) == 1:
                a, b = by_frame[left][0], by_frame[right][0]
                for pos in range(left + 1, right):
                    new_dets.setdefault(pos, []).append(
                        _fill_detection(a, b, (pos - left) / (right - left))
                    )

    if not (new_head or new_kps or new_dets):
        return session

    repaired = []
    for i, f in enumerate(frames):
        head = f.head_pose if f.head_pose is not None else new_head.get(i)
        kps = f.keypoints + tuple(new_kps.get(i, ()))
        dets = f.detections + tuple(new_dets.get(i, ()))
        if head is not f.head_pose or kps != f.keypoints or dets != f.detections:
            f = replace(f, head_pose=head, keypoints=kps, detections=dets)
        repaired.append(f)
    return replace(session, frames=tuple(repaired))
