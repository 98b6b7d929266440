"""Single-pass online analysis of a session stream with bounded memory.

The stream path mirrors the batch pipeline stage by stage: bounded-
lookahead gap repair, centered median smoothing, and incremental first-
minimum detection, emitting each event record as soon as its minimum is
confirmed. On clean sessions whose events fall inside the automatic
windows the emitted records are byte-identical to the analyze command's;
the correspondence is exercised directly by the equivalence tests.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ConfigError, SceneConfig
from .events import EventTimes, OnlineMinDetector, compute_anticipation
from .geometry import FACIAL_KEYPOINT_IDS, ProjectionError
from .ingest import (
    FrameOrderChecker,
    FrameRecord,
    HeadPose,
    ParseError,
    _fill_detection,
    _fill_head_pose,
    _fill_keypoint,
    decode_line,
    parse_frame_payload,
    parse_header_payload,
)
from .pipeline import format_event_record
from .signals import (
    ObjectTrackFollower,
    TargetSpec,
    frame_gaze_point,
    frame_wrist_point,
    median_of,
    point_distance,
)

# Smoothed samples buffered per transport detector while the touch event is
# still pending; a cap keeps memory bounded on pathological streams.
REPLAY_CAP = 4096


# --- Bounded-lookahead gap repair -------------------------------------------


@dataclass
class _PendingFrame:
    position: int  # accepted-frame ordinal, the smoothing/repair coordinate
    frame_index: int
    timestamp: float
    keypoints: dict
    detections: dict
    head_pose: HeadPose | None
    resolved: set = field(default_factory=set)

    def to_record(self) -> FrameRecord:
        dets = []
        for cls in sorted(self.detections):
            dets.extend(self.detections[cls])
        return FrameRecord(
            frame_index=self.frame_index,
            timestamp=self.timestamp,
            keypoints=tuple(self.keypoints[k] for k in sorted(self.keypoints)),
            detections=tuple(dets),
            head_pose=self.head_pose,
        )


class _Channel:
    """One repairable per-frame quantity (head pose, a keypoint id, a class).

    Tracks the last frame the quantity was present and fills gaps of at
    most max_gap frames the moment the closing endpoint arrives, exactly
    like the batch repair. A pending frame is resolved for this channel
    once its value is present, filled, or provably unfillable.
    """

    def __init__(self, name: str, max_gap: int):
        self.name = name
        self.max_gap = max_gap
        self.last_present_pos: int | None = None
        self.last_payload = None

    def extract(self, holder: _PendingFrame):
        raise NotImplementedError

    def fill(self, a, b, frac: float):
        raise NotImplementedError

    def inject(self, holder: _PendingFrame, payload) -> None:
        raise NotImplementedError

    def observe(self, pending: deque) -> None:
        holder = pending[-1]
        pos = holder.position
        payload = self.extract(holder)
        if payload is not None:
            if self.last_present_pos is not None:
                gap = pos - self.last_present_pos - 1
                if 0 < gap <= self.max_gap:
                    for mid in pending:
                        if self.last_present_pos < mid.position < pos:
                            frac = (mid.position - self.last_present_pos) / (pos - self.last_present_pos)
                            filled = self.fill(self.last_payload, payload, frac)
                            if filled is not None:
                                self.inject(mid, filled)
            for mid in pending:
                mid.resolved.add(self.name)
            self.last_present_pos = pos
            self.last_payload = payload
        else:
            anchor = self.last_present_pos if self.last_present_pos is not None else -(self.max_gap + 2)
            if pos - anchor > self.max_gap:
                for mid in pending:
                    if mid.position > anchor:
                        mid.resolved.add(self.name)


class _HeadPoseChannel(_Channel):
    def extract(self, holder):
        return holder.head_pose

    def fill(self, a, b, frac):
        return _fill_head_pose(a, b, frac)

    def inject(self, holder, payload):
        holder.head_pose = payload


class _KeypointChannel(_Channel):
    def __init__(self, kp_id: str, max_gap: int):
        super().__init__(f"kp:{kp_id}", max_gap)
        self.kp_id = kp_id

    def extract(self, holder):
        return holder.keypoints.get(self.kp_id)

    def fill(self, a, b, frac):
        return _fill_keypoint(a, b, frac)

    def inject(self, holder, payload):
        holder.keypoints[self.kp_id] = payload


class _DetectionChannel(_Channel):
    def __init__(self, class_label: str, max_gap: int):
        super().__init__(f"det:{class_label}", max_gap)
        self.class_label = class_label

    def extract(self, holder):
        return holder.detections.get(self.class_label) or None

    def fill(self, a, b, frac):
        # interpolation is only well defined for a single instance
        if len(a) == 1 and len(b) == 1:
            return [_fill_detection(a[0], b[0], frac)]
        return None

    def inject(self, holder, payload):
        holder.detections[self.class_label] = payload


# --- Online centered median --------------------------------------------------


class OnlineMedianSmoother:
    """Centered moving median emitted half_width samples behind the input.

    Matches the batch smoother sample for sample, including the truncated
    windows at both ends of the stream.
    """

    def __init__(self, half_width: int):
        self.hw = half_width
        self._buf: deque = deque()  # (position, frame, value, valid), contiguous
        self._next_pos = 0
        self._next_center = 0

    def _emit(self, center: int) -> tuple[int, float, bool]:
        lo = center - self.hw
        while self._buf and self._buf[0][0] < lo:
            self._buf.popleft()
        hi = center + self.hw
        frame = self._buf[center - self._buf[0][0]][1]
        values = [v for (p, _, v, ok) in self._buf if p <= hi and ok]
        if not values:
            return frame, math.nan, False
        return frame, median_of(values), True

    def push(self, frame: int, value: float, valid: bool) -> list[tuple[int, float, bool]]:
        pos = self._next_pos
        self._next_pos += 1
        self._buf.append((pos, frame, value, valid))
        out = []
        while self._next_center + self.hw <= pos:
            out.append(self._emit(self._next_center))
            self._next_center += 1
        return out

    def flush(self) -> list[tuple[int, float, bool]]:
        out = []
        while self._next_center < self._next_pos:
            out.append(self._emit(self._next_center))
            self._next_center += 1
        return out


# --- Per-target online event state -------------------------------------------


class _PhaseState:
    def __init__(self, target: TargetSpec, scene: SceneConfig):
        self.target = target
        self.kind = target.phase
        self.follower = ObjectTrackFollower(target.object_class, scene.association_radius)
        hw = scene.smoothing_half_width
        self.sm_g = OnlineMedianSmoother(hw)
        self.sm_h = OnlineMedianSmoother(hw)
        self.sm_o = OnlineMedianSmoother(hw) if self.kind == "transport" else None
        self.emitted = False

        if scene.windows.explicit:
            reach_w = scene.windows.reach_window
            trans_w = scene.windows.transport_window
            self.det_touch = OnlineMinDetector(*reach_w)
            if self.kind == "reach":
                self.det_gaze = OnlineMinDetector(*reach_w)
                self.det_place = None
            else:
                self.det_gaze = OnlineMinDetector(*trans_w)
                self.det_place = OnlineMinDetector(*trans_w)
            self._gaze_buffer = None
            self._place_buffer = None
        else:
            # transport detectors start just past the touch event, which is
            # only known once confirmed; buffer smoothed samples for replay
            self.det_touch = OnlineMinDetector()
            if self.kind == "reach":
                self.det_gaze = OnlineMinDetector()
                self.det_place = None
                self._gaze_buffer = None
                self._place_buffer = None
            else:
                self.det_gaze = None
                self.det_place = None
                self._gaze_buffer = deque(maxlen=REPLAY_CAP)
                self._place_buffer = deque(maxlen=REPLAY_CAP)

    def _activate_transport(self, touch_frame: int) -> None:
        self.det_gaze = OnlineMinDetector(start=touch_frame + 1)
        self.det_place = OnlineMinDetector(start=touch_frame + 1)
        for f, v, ok in self._gaze_buffer:
            self.det_gaze.push(f, v, ok)
        for f, v, ok in self._place_buffer:
            self.det_place.push(f, v, ok)
        self._gaze_buffer = None
        self._place_buffer = None

    def push_raw(self, frame: int, d_g, d_h, d_o) -> None:
        """Feed one frame's raw samples; values are (value, valid) pairs."""
        for f, v, ok in self.sm_h.push(frame, *d_h):
            ev = self.det_touch.push(f, v, ok)
            if ev is not None and self.kind == "transport" and self._gaze_buffer is not None:
                self._activate_transport(ev[0])
        for f, v, ok in self.sm_g.push(frame, *d_g):
            if self.det_gaze is not None:
                self.det_gaze.push(f, v, ok)
            elif self._gaze_buffer is not None:
                self._gaze_buffer.append((f, v, ok))
        if self.sm_o is not None:
            for f, v, ok in self.sm_o.push(frame, *d_o):
                if self.det_place is not None:
                    self.det_place.push(f, v, ok)
                elif self._place_buffer is not None:
                    self._place_buffer.append((f, v, ok))

    def finish(self) -> None:
        for f, v, ok in self.sm_h.flush():
            ev = self.det_touch.push(f, v, ok)
            if ev is not None and self.kind == "transport" and self._gaze_buffer is not None:
                self._activate_transport(ev[0])
        gaze_tail = self.sm_g.flush()
        place_tail = self.sm_o.flush() if self.sm_o is not None else []
        if self.det_touch.finalize() is not None and self.kind == "transport" and self._gaze_buffer is not None:
            self._activate_transport(self.det_touch.result[0])
        for f, v, ok in gaze_tail:
            if self.det_gaze is not None:
                self.det_gaze.push(f, v, ok)
            elif self._gaze_buffer is not None:
                self._gaze_buffer.append((f, v, ok))
        for f, v, ok in place_tail:
            if self.det_place is not None:
                self.det_place.push(f, v, ok)
            elif self._place_buffer is not None:
                self._place_buffer.append((f, v, ok))
        if self.det_gaze is not None:
            self.det_gaze.finalize()
        if self.det_place is not None:
            self.det_place.finalize()

    def complete(self) -> bool:
        if self.det_gaze is None or self.det_gaze.result is None:
            return False
        if self.kind == "reach":
            return self.det_touch.result is not None
        return self.det_place is not None and self.det_place.result is not None

    def missing_events(self) -> list[str]:
        missing = []
        if self.det_gaze is None or self.det_gaze.result is None:
            missing.append("gazing_target_time")
        if self.kind == "reach":
            if self.det_touch.result is None:
                missing.append("touching_object_time")
        elif self.det_place is None or self.det_place.result is None:
            missing.append("target_object_time")
        return missing

    def event_times(self) -> EventTimes:
        gaze = self.det_gaze.result
        touch = self.det_touch.result
        place = self.det_place.result if self.det_place is not None else None
        return EventTimes(
            gazing_target_time=gaze[0] if gaze else None,
            gazing_target_value=gaze[1] if gaze else None,
            touching_object_time=touch[0] if touch else None,
            touching_object_value=touch[1] if touch else None,
            target_object_time=place[0] if place else None,
            target_object_value=place[1] if place else None,
        )


# --- The analyzer --------------------------------------------------------------


class StreamAnalyzer:
    """Consume one session stream line by line and emit event records.

    State is bounded by the repair lookahead, the smoothing window, and
    the (capped) transport replay buffers, independent of stream length.
    """

    def __init__(
        self,
        scene: SceneConfig,
        on_event: Callable[[str], None],
        on_diagnostic: Callable[[str], None],
    ):
        if scene.hand == "auto":
            raise ConfigError("hand='auto' needs the whole session; use left or right when streaming")
        self.scene = scene
        self._on_event = on_event
        self._on_diagnostic = on_diagnostic
        self.session_id: str | None = None
        self.fps: float | None = None
        self.action_label: str | None = None
        self.diagnostics = 0     # all messages sent to the diagnostic channel
        self.line_errors = 0     # malformed/rejected input lines only
        self.events_emitted = 0
        self._line_no = 0
        self._accepted = 0
        self._checker: FrameOrderChecker | None = None
        self._pending: deque = deque()
        self._channels: list[_Channel] = []
        self._states: list[_PhaseState] = []
        self._finalized = False

    # -- wiring

    def _diag(self, message: str, line_error: bool = True) -> None:
        self.diagnostics += 1
        if line_error:
            self.line_errors += 1
        self._on_diagnostic(message)

    def _setup(self) -> None:
        needed_ids = set(FACIAL_KEYPOINT_IDS)
        needed_ids.add("l_wrist" if self.scene.hand == "left" else "r_wrist")
        classes = []
        for target in self.scene.targets:
            if target.applies_to(self.action_label):
                self._states.append(_PhaseState(target, self.scene))
                if target.object_class not in classes:
                    classes.append(target.object_class)
        gap = self.scene.max_gap
        self._channels = [_HeadPoseChannel("head_pose", gap)]
        self._channels += [_KeypointChannel(kp_id, gap) for kp_id in sorted(needed_ids)]
        self._channels += [_DetectionChannel(cls, gap) for cls in classes]

    # -- per line

    def feed_line(self, text: str) -> None:
        if self._finalized:
            raise RuntimeError("stream already finalized")
        self._line_no += 1
        stripped = text.strip()
        if not stripped:
            return
        try:
            obj = decode_line(stripped, self._line_no)
        except ParseError as exc:
            self._diag(str(exc))
            return

        if self.session_id is None:
            if obj["type"] != "header":
                self._diag(f"line {self._line_no}: record before session header ignored")
                return
            try:
                self.session_id, self.fps, self.action_label = parse_header_payload(obj, self._line_no)
            except ParseError as exc:
                self._diag(str(exc))
                return
            self._checker = FrameOrderChecker(self.fps)
            self._setup()
            return

        if obj["type"] == "header":
            self._diag(f"line {self._line_no}: duplicate header ignored")
            return
        if obj["type"] != "frame":
            return
        try:
            frame = parse_frame_payload(obj, self._line_no)
            self._checker.check(frame, self._line_no)
        except ParseError as exc:
            self._diag(str(exc))
            return
        self._accept(frame)

    def _accept(self, frame: FrameRecord) -> None:
        kps: dict = {}
        for kp in frame.keypoints:
            prev = kps.get(kp.id)
            if prev is None or kp.confidence > prev.confidence:
                kps[kp.id] = kp
        dets: dict = {}
        for det in frame.detections:
            dets.setdefault(det.class_label, []).append(det)
        holder = _PendingFrame(
            position=self._accepted,
            frame_index=frame.frame_index,
            timestamp=frame.timestamp,
            keypoints=kps,
            detections=dets,
            head_pose=frame.head_pose,
        )
        self._accepted += 1
        self._pending.append(holder)
        for channel in self._channels:
            channel.observe(self._pending)
        self._release_ready()

    def _release_ready(self) -> None:
        n_channels = len(self._channels)
        while self._pending and len(self._pending[0].resolved) >= n_channels:
            self._process(self._pending.popleft().to_record())

    def _process(self, rec: FrameRecord) -> None:
        try:
            p_g = frame_gaze_point(rec, self.scene)
        except ProjectionError:
            p_g = None
        try:
            wrist = frame_wrist_point(rec, self.scene.hand, self.scene)
        except ProjectionError:
            wrist = None

        invalid = (math.nan, False)
        for state in self._states:
            track_pos = state.follower.step(rec)
            if state.target.kind == "object":
                gaze_target = track_pos
            else:
                gaze_target = state.target.target_position
            d_g = (
                (point_distance(p_g, gaze_target), True)
                if p_g is not None and gaze_target is not None
                else invalid
            )
            d_h = (
                (point_distance(wrist, track_pos), True)
                if wrist is not None and track_pos is not None
                else invalid
            )
            if state.kind == "transport" and track_pos is not None:
                d_o = (point_distance(track_pos, state.target.target_position), True)
            else:
                d_o = invalid
            state.push_raw(rec.frame_index, d_g, d_h, d_o)
        self._emit_ready()

    def _emit_ready(self) -> None:
        for state in self._states:
            if state.emitted or not state.complete():
                continue
            result = compute_anticipation(
                state.event_times(),
                self.fps,
                state.kind,
                session_id=self.session_id,
                action_label=self.action_label or "",
            )
            state.emitted = True
            self.events_emitted += 1
            self._on_event(format_event_record(result))

    # -- end of stream

    def finalize(self) -> None:
        """Flush pending state at end of stream and report missing events."""
        if self._finalized:
            return
        self._finalized = True
        if self.session_id is None:
            self._diag("stream ended before a session header", line_error=False)
            return
        # gaps still open at EOF can never be closed; release everything
        for holder in self._pending:
            holder.resolved.update(ch.name for ch in self._channels)
        self._release_ready()
        for state in self._states:
            state.finish()
        self._emit_ready()
        for state in self._states:
            if state.emitted:
                continue
            for name in state.missing_events():
                self._diag(f"{state.kind} phase: {name} not detected by end of stream", line_error=False)
