"""Per-session batch analysis: repair, signals, windows, events, anticipation."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .config import SceneConfig
from .events import (
    AnalysisWindows,
    AnticipationResult,
    EventTimes,
    compute_anticipation,
    detect_events,
    split_windows,
)
from .ingest import Session, repair_gaps
from .signals import SignalSet, TargetSpec, build_signals, smooth_signals

EVENT_RECORD_FIELDS = (
    "session_id",
    "action_label",
    "phase",
    "gazing_frame",
    "hand_event_frame",
    "anticipation_seconds",
)


@dataclass
class PhaseAnalysis:
    """Everything the analysis produced for one (session, target) pair."""

    target: TargetSpec
    result: AnticipationResult
    signals: SignalSet          # raw distances (plot data)
    smoothed: SignalSet
    windows: AnalysisWindows


def analyze_session(session: Session, scene: SceneConfig) -> list[PhaseAnalysis]:
    """Run the full pipeline for every target applicable to the session."""
    repaired = repair_gaps(session, scene.max_gap)
    analyses = []
    for target in scene.targets:
        if not target.applies_to(session.action_label):
            continue
        raw = build_signals(repaired, scene, target)
        smoothed = smooth_signals(raw, scene.smoothing_half_width)
        windows = split_windows(
            smoothed, len(repaired), configured=scene.windows, margin=scene.split_margin
        )
        events = detect_events(smoothed, windows, target.phase)
        result = compute_anticipation(
            events,
            session.fps,
            target.phase,
            session_id=session.session_id,
            action_label=session.action_label or "",
        )
        analyses.append(
            PhaseAnalysis(target=target, result=result, signals=raw, smoothed=smoothed, windows=windows)
        )
    return analyses


def event_record(result: AnticipationResult) -> dict:
    return {
        "session_id": result.session_id,
        "action_label": result.action_label,
        "phase": result.phase,
        "gazing_frame": result.event_times.gazing_target_time,
        "hand_event_frame": result.hand_event_frame,
        "anticipation_seconds": result.anticipation_seconds,
    }


def format_event_record(result: AnticipationResult) -> str:
    """Canonical one-line JSON form; shared by batch and stream output."""
    return json.dumps(event_record(result), separators=(",", ":"))


def signals_csv(analysis: PhaseAnalysis, fps: float) -> str:
    """Raw signal series as CSV (the plot data behind the distance figures)."""
    lines = ["frame,t_seconds,d_g,d_h,d_o,valid_g,valid_h,valid_o"]
    raw = analysis.signals
    for i in range(raw.frame_count):
        frame = int(raw.d_g.frame_index[i])
        cells = [str(frame), f"{frame / fps:.6f}"]
        for series in (raw.d_g, raw.d_h, raw.d_o):
            cells.append(f"{series.values[i]:.6f}" if series.valid[i] else "")
        for series in (raw.d_g, raw.d_h, raw.d_o):
            cells.append("1" if series.valid[i] else "0")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
