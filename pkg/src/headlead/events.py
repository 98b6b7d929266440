"""Event-time detection on the distance series and the anticipation measure.

An event time is the first minimum of its (smoothed) series within a
search window: the earliest valid frame whose value is <= both nearest
valid neighbors inside the window. Window endpoints compare only toward
the interior, plateaus resolve to their earliest frame, and if no local
minimum exists the windowed argmin (earliest on ties) is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signals import MaskedSeries, SignalSet

DEFAULT_SPLIT_MARGIN = 5  # frames appended to the reach window past the d_H minimum

PHASES = ("reach", "transport")


class EventDetectionError(ValueError):
    """A required event cannot be detected; the message names the event."""


class EmptyWindowError(EventDetectionError):
    """The search window contains no valid sample."""


class CannotSplitError(EventDetectionError):
    """Automatic window splitting failed (d_H entirely invalid)."""


@dataclass(frozen=True)
class AnalysisWindows:
    """Frame-index intervals searched for the reach and transport events."""

    reach_window: tuple[int, int] | None = None
    transport_window: tuple[int, int] | None = None
    auto_split: bool = True

    def __post_init__(self):
        for name, w in (("reach_window", self.reach_window), ("transport_window", self.transport_window)):
            if w is not None and w[0] > w[1]:
                raise ValueError(f"{name} bounds out of order: {w}")
        if self.reach_window is not None and self.transport_window is not None:
            if self.reach_window[1] > self.transport_window[1]:
                raise ValueError("reach window may not extend past the transport window")

    @property
    def explicit(self) -> bool:
        return self.reach_window is not None and self.transport_window is not None


@dataclass(frozen=True)
class EventTimes:
    """The detected instants (frame indices) with their achieved distances."""

    gazing_target_time: int | None = None
    gazing_target_value: float | None = None
    touching_object_time: int | None = None
    touching_object_value: float | None = None
    target_object_time: int | None = None
    target_object_value: float | None = None


@dataclass(frozen=True)
class AnticipationResult:
    session_id: str
    action_label: str
    phase: str
    anticipation_seconds: float
    event_times: EventTimes
    fps: float

    @property
    def hand_event_frame(self) -> int | None:
        if self.phase == "reach":
            return self.event_times.touching_object_time
        return self.event_times.target_object_time


def first_window_min(series: MaskedSeries, window: tuple[int, int]) -> tuple[int, float]:
    """First minimum of a masked series within [window[0], window[1]].

    Returns (frame_index, value). Raises EmptyWindowError when the window
    holds no valid sample.
    """
    a, b = int(window[0]), int(window[1])
    if a > b:
        raise ValueError(f"window bounds out of order: {window}")
    inside = (series.frame_index >= a) & (series.frame_index <= b)
    positions = np.nonzero(inside & series.valid)[0]
    if len(positions) == 0:
        raise EmptyWindowError(f"no valid sample in window [{a},{b}]")

    values = series.values[positions]
    for j in range(len(positions)):
        left_ok = j == 0 or values[j] <= values[j - 1]
        right_ok = j == len(positions) - 1 or values[j] <= values[j + 1]
        if left_ok and right_ok:
            return int(series.frame_index[positions[j]]), float(values[j])

    # unreachable with <= comparisons, kept as the defined fallback
    k = int(np.argmin(values))
    return int(series.frame_index[positions[k]]), float(values[k])


def split_windows(
    signals: SignalSet,
    session_length: int,
    configured: AnalysisWindows | None = None,
    margin: int = DEFAULT_SPLIT_MARGIN,
) -> AnalysisWindows:
    """Derive the reach/transport search windows from the smoothed d_H.

    Explicitly configured windows are returned unchanged. Otherwise the
    global d_H minimum marks the grasp: the reach window runs from the
    first frame to that minimum plus a small margin, the transport window
    from just after the minimum to the end of the session.
    """
    if configured is not None and configured.explicit:
        return configured
    d_h = signals.d_h
    if not d_h.valid.any():
        raise CannotSplitError("cannot split: hand-object distance entirely invalid")
    masked = np.where(d_h.valid, d_h.values, math.inf)
    t_touch = int(d_h.frame_index[int(np.argmin(masked))])
    first = int(d_h.frame_index[0])
    last = first + int(session_length) - 1
    reach = (first, min(t_touch + margin, last))
    transport = (min(t_touch + 1, last), last)
    return AnalysisWindows(reach_window=reach, transport_window=transport, auto_split=True)


def detect_events(signals: SignalSet, windows: AnalysisWindows, kind: str) -> EventTimes:
    """Detect the gaze/hand/object event times for one movement phase.

    `signals` is expected to be smoothed already. For kind="reach" the
    gaze event is searched in the reach window; for kind="transport" the
    gaze and object-placement events are searched in the transport window
    while the touch event stays in the reach window.
    """
    if kind not in PHASES:
        raise ValueError(f"kind must be one of {PHASES}, got {kind!r}")
    if windows.reach_window is None:
        raise EventDetectionError("touching_object_time: reach window undefined")

    def _detect(name: str, series: MaskedSeries, window: tuple[int, int]) -> tuple[int, float]:
        try:
            return first_window_min(series, window)
        except EmptyWindowError as exc:
            raise EventDetectionError(f"{name}: {exc}") from exc

    touch_frame, touch_value = _detect("touching_object_time", signals.d_h, windows.reach_window)

    if kind == "reach":
        gaze_frame, gaze_value = _detect("gazing_target_time", signals.d_g, windows.reach_window)
        return EventTimes(
            gazing_target_time=gaze_frame,
            gazing_target_value=gaze_value,
            touching_object_time=touch_frame,
            touching_object_value=touch_value,
        )

    if windows.transport_window is None:
        raise EventDetectionError("target_object_time: transport window undefined")
    gaze_frame, gaze_value = _detect("gazing_target_time", signals.d_g, windows.transport_window)
    place_frame, place_value = _detect("target_object_time", signals.d_o, windows.transport_window)
    return EventTimes(
        gazing_target_time=gaze_frame,
        gazing_target_value=gaze_value,
        touching_object_time=touch_frame,
        touching_object_value=touch_value,
        target_object_time=place_frame,
        target_object_value=place_value,
    )


def compute_anticipation(
    events: EventTimes,
    fps: float,
    kind: str,
    session_id: str = "",
    action_label: str = "",
) -> AnticipationResult:
    """Signed anticipation interval in seconds.

    Defined as (gaze event - hand/object event) / fps, so the value is
    negative when the head reaches the goal before the hand does.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    if kind not in PHASES:
        raise ValueError(f"kind must be one of {PHASES}, got {kind!r}")
    if events.gazing_target_time is None:
        raise EventDetectionError("gazing_target_time missing")
    if kind == "reach":
        if events.touching_object_time is None:
            raise EventDetectionError("touching_object_time missing")
        hand_event = events.touching_object_time
    else:
        if events.target_object_time is None:
            raise EventDetectionError("target_object_time missing")
        hand_event = events.target_object_time
    seconds = (events.gazing_target_time - hand_event) / fps
    return AnticipationResult(
        session_id=session_id,
        action_label=action_label,
        phase=kind,
        anticipation_seconds=seconds,
        event_times=events,
        fps=fps,
    )


class OnlineMinDetector:
    """Incremental first-window-min over a stream of (frame, value, valid).

    Pushes must arrive in frame order. The detector emits its event as
    soon as the local-minimum condition is confirmed by the next valid
    sample (one valid-sample confirmation latency); finalize() resolves
    windows that end without a confirming neighbor, matching the batch
    endpoint and argmin-fallback rules.
    """

    def __init__(self, start: int | None = None, end: int | None = None):
        self.start = start
        self.end = end
        self.result: tuple[int, float] | None = None
        self._candidate: tuple[int, float] | None = None
        self._prev_value: float | None = None
        self._argmin: tuple[int, float] | None = None
        self._done = False

    def push(self, frame: int, value: float, valid: bool) -> tuple[int, float] | None:
        """Feed one sample; returns the event the moment it is confirmed."""
        if self._done:
            return None
        if self.start is not None and frame < self.start:
            return None
        if self.end is not None and frame > self.end:
            return self.finalize()
        if not valid:
            return None

        if self._argmin is None or value < self._argmin[1]:
            self._argmin = (frame, value)

        if self._candidate is not None:
            if self._candidate[1] <= value:
                self.result = self._candidate
                self._done = True
                return self.result
            self._candidate = (frame, value)  # left condition holds: value < candidate
        elif self._prev_value is None or value <= self._prev_value:
            self._candidate = (frame, value)
        self._prev_value = value
        return None

    def finalize(self) -> tuple[int, float] | None:
        """Resolve at end of window or stream.

        Returns the event if this call resolved it; None if the detector
        already fired (the result stays readable on .result).
        """
        if self._done:
            return None
        self._done = True
        if self._candidate is not None:
            self.result = self._candidate  # endpoint compares toward the interior only
        elif self._argmin is not None:
            self.result = self._argmin
        return self.result
