"""Scene configuration: projection geometry, targets, and analysis knobs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .events import AnalysisWindows, DEFAULT_SPLIT_MARGIN
from .geometry import Plane, TableLine, DEFAULT_CONFIDENCE_THRESHOLD
from .ingest import DEFAULT_MAX_GAP
from .signals import TargetSpec, DEFAULT_ASSOCIATION_RADIUS, DEFAULT_SMOOTHING_HALF_WIDTH

PROJECTION_MODES = ("MODE_3D", "MODE_2D")
HAND_CHOICES = ("left", "right", "auto")


class ConfigError(ValueError):
    """Invalid or incomplete scene configuration."""


@dataclass
class SceneConfig:
    """Prior knowledge about the scene plus pipeline parameters.

    MODE_3D projects the gaze ray onto table_plane (camera frame);
    MODE_2D extends the image-projected head axis to table_line (image
    coordinates). Exactly the geometry for the selected mode must be set.
    """

    projection_mode: str = "MODE_3D"
    table_plane: Plane | None = None
    table_line: TableLine | None = None
    targets: list[TargetSpec] = field(default_factory=list)
    hand: str = "right"
    windows: AnalysisWindows = field(default_factory=AnalysisWindows)
    split_margin: int = DEFAULT_SPLIT_MARGIN
    smoothing_half_width: int = DEFAULT_SMOOTHING_HALF_WIDTH
    max_gap: int = DEFAULT_MAX_GAP
    association_radius: float = DEFAULT_ASSOCIATION_RADIUS
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD

    def __post_init__(self):
        if self.projection_mode not in PROJECTION_MODES:
            raise ConfigError(f"projection_mode must be one of {PROJECTION_MODES}")
        if self.projection_mode == "MODE_3D" and self.table_plane is None:
            raise ConfigError("MODE_3D requires table_plane")
        if self.projection_mode == "MODE_2D" and self.table_line is None:
            raise ConfigError("MODE_2D requires table_line")
        if self.hand not in HAND_CHOICES:
            raise ConfigError(f"hand must be one of {HAND_CHOICES}")
        if not self.targets:
            raise ConfigError("at least one target is required")
        if self.smoothing_half_width < 0:
            raise ConfigError("smoothing_half_width must be >= 0")
        if self.max_gap < 0:
            raise ConfigError("max_gap must be >= 0")
        if self.association_radius <= 0:
            raise ConfigError("association_radius must be positive")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError("confidence_threshold must be in [0,1]")


def _parse_target(obj: dict, i: int) -> TargetSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"targets[{i}] must be an object")
    try:
        labels = obj.get("action_labels")
        return TargetSpec(
            kind=obj.get("kind", ""),
            object_class=obj.get("object_class", ""),
            target_position=obj.get("target_position"),
            action_labels=None if labels is None else tuple(labels),
        )
    except ValueError as exc:
        raise ConfigError(f"targets[{i}]: {exc}") from exc


def _parse_windows(obj) -> tuple[AnalysisWindows, int]:
    margin = DEFAULT_SPLIT_MARGIN
    if obj is None or obj == "auto":
        return AnalysisWindows(), margin
    if not isinstance(obj, dict):
        raise ConfigError("windows must be 'auto' or an object")
    margin = int(obj.get("margin", DEFAULT_SPLIT_MARGIN))
    reach = obj.get("reach_window")
    transport = obj.get("transport_window")
    if (reach is None) != (transport is None):
        raise ConfigError("explicit windows require both reach_window and transport_window")
    try:
        return (
            AnalysisWindows(
                reach_window=None if reach is None else (int(reach[0]), int(reach[1])),
                transport_window=None if transport is None else (int(transport[0]), int(transport[1])),
                auto_split=bool(obj.get("auto_split", reach is None)),
            ),
            margin,
        )
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"windows: {exc}") from exc


def scene_config_from_dict(doc: dict) -> SceneConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    try:
        plane = None
        if doc.get("table_plane") is not None:
            tp = doc["table_plane"]
            plane = Plane(
                normal=np.asarray(tp["normal"], dtype=float),
                offset=float(tp["offset"]),
                frame_tag=tp.get("frame_tag", "camera"),
            )
        line = None
        if doc.get("table_line") is not None:
            tl = doc["table_line"]
            line = TableLine(p0=np.asarray(tl[0], dtype=float), p1=np.asarray(tl[1], dtype=float))
    except (KeyError, ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"table geometry: {exc}") from exc

    windows, margin = _parse_windows(doc.get("windows"))
    targets = [_parse_target(t, i) for i, t in enumerate(doc.get("targets", []))]
    try:
        return SceneConfig(
            projection_mode=doc.get("projection_mode", "MODE_3D"),
            table_plane=plane,
            table_line=line,
            targets=targets,
            hand=doc.get("hand", "right"),
            windows=windows,
            split_margin=margin,
            smoothing_half_width=int(doc.get("smoothing_half_width", DEFAULT_SMOOTHING_HALF_WIDTH)),
            max_gap=int(doc.get("max_gap", DEFAULT_MAX_GAP)),
            association_radius=float(doc.get("association_radius", DEFAULT_ASSOCIATION_RADIUS)),
            confidence_threshold=float(doc.get("confidence_threshold", DEFAULT_CONFIDENCE_THRESHOLD)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scene_config(path) -> SceneConfig:
    """Load and validate a SceneConfig JSON document."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return scene_config_from_dict(doc)


def scene_config_to_dict(scene: SceneConfig) -> dict:
    """Inverse of scene_config_from_dict (used when generating benchmarks)."""
    doc: dict = {"projection_mode": scene.projection_mode}
    if scene.table_plane is not None:
        doc["table_plane"] = {
            "normal": [float(v) for v in scene.table_plane.normal],
            "offset": scene.table_plane.offset,
            "frame_tag": scene.table_plane.frame_tag,
        }
    if scene.table_line is not None:
        doc["table_line"] = [
            [float(v) for v in scene.table_line.p0],
            [float(v) for v in scene.table_line.p1],
        ]
    doc["targets"] = []
    for t in scene.targets:
        entry: dict = {"kind": t.kind, "object_class": t.object_class}
        if t.target_position is not None:
            entry["target_position"] = [float(v) for v in t.target_position]
        if t.action_labels is not None:
            entry["action_labels"] = list(t.action_labels)
        doc["targets"].append(entry)
    doc["hand"] = scene.hand
    if scene.windows.explicit:
        doc["windows"] = {
            "reach_window": list(scene.windows.reach_window),
            "transport_window": list(scene.windows.transport_window),
            "auto_split": scene.windows.auto_split,
        }
    else:
        doc["windows"] = {"auto_split": True, "margin": scene.split_margin}
    doc["smoothing_half_width"] = scene.smoothing_half_width
    doc["max_gap"] = scene.max_gap
    doc["association_radius"] = scene.association_radius
    doc["confidence_threshold"] = scene.confidence_threshold
    return doc
