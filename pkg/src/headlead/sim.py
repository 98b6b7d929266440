"""Synthetic session generator with known ground-truth event frames.

Scenes are emitted in image coordinates for 2D projection: the subject's
head sits above a horizontal table line, the gaze point sweeps along the
line with a minimum-jerk profile and reaches the goal a configurable lead
ahead of the hand. Recordings start mid-motion, so every distance series
is already descending at frame 0 rather than sitting flat under noise.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .config import SceneConfig
from .events import DEFAULT_SPLIT_MARGIN
from .geometry import TableLine
from .ingest import Detection, FrameRecord, HeadPose, Keypoint, Session, write_session
from .signals import TargetSpec

# Facial keypoint offsets from the head anchor (nose), image pixels.
FACE_OFFSETS = (
    ("nose", 0.0, 0.0),
    ("l_eye", -14.0, -10.0),
    ("r_eye", 14.0, -10.0),
    ("l_ear", -30.0, -4.0),
    ("r_ear", 30.0, -4.0),
)

KEYPOINT_CONF = 0.95
POSE_CONF = 0.9
BOX_CONF = 0.9


class InvalidScenario(ValueError):
    """The requested geometry or timing cannot produce a valid session."""


# Movements aim past their goal and saturate at contact/fixation, keeping
# the approach steep right up to arrival instead of fading along the
# minimum-jerk tail; grid-exact arrival frames survive noise this way.
OVERSHOOT_AIM = 0.25

# After arrival each signal drifts away from its goal: slowly for a few
# settle frames (fixation micro-drift, grip shift, release nudge), then
# faster. The slow start makes the arrival frame a strict pixel-scale
# minimum (stable under any coordinate scaling), while the later rise
# keeps the minimum in a bounded notch instead of an endless noise
# plateau.
SETTLE_FRAMES = 3
SETTLE_RATE = 0.5            # px/frame during the settle
# the carried object may not jump past the tracker's association radius,
# so its profile starts closer to rest than the gaze/hand profiles
CARRY_ONSET_PHASE = 0.25
GRIP_DRIFT_PER_FRAME = 2.0   # px/frame, wrist relative to the carried centroid
GRIP_DRIFT_CAP = 14.0
GAZE_DRIFT_PER_FRAME = 1.5   # px/frame along the table line after fixation
GAZE_DRIFT_CAP = 12.0
PLACE_NUDGE_PER_FRAME = 2.0  # px/frame the released object settles
PLACE_NUDGE_CAP = 8.0
_GRIP_DRIFT_DIR = (0.6, -0.8)
_PLACE_NUDGE_DIR = (0.8, 0.6)


def _drift(frame: int, arrive: int, rate: float, cap: float) -> float:
    """Offset magnitude of the post-arrival drift (zero at arrival itself)."""
    k = frame - arrive
    if k <= 0:
        return 0.0
    if k <= SETTLE_FRAMES:
        return min(cap, SETTLE_RATE * k)
    return min(cap, SETTLE_RATE * SETTLE_FRAMES + rate * (k - SETTLE_FRAMES))


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one synthetic reach or transport recording."""

    fps: float = 30.0
    duration: float | None = None  # seconds; derived from the timeline when None
    kind: str = "reach"
    head_lead: float = 0.5        # seconds the gaze arrives ahead of the hand/object
    reach_duration: float = 1.5   # seconds from recording start to the touch
    carry_duration: float = 1.4   # seconds from touch to placement (transport)
    post_roll: float = 1.0        # seconds of hold after the last event
    onset_phase: float = 0.35     # profiles start this far into the minimum-jerk curve
    pregaze_turn: float = 0.2     # seconds before touch the head turns to the drop target
    noise_sigma: float = 0.0      # px, additive Gaussian on emitted pixel quantities
    dropout_rate: float = 0.0     # per frame per channel
    object_start: tuple = (540.0, 420.0)
    target_position: tuple = (140.0, 420.0)
    head_origin: tuple = (320.0, 80.0)
    wrist_rest: tuple = (260.0, 680.0)
    off_wrist_rest: tuple = (120.0, 680.0)
    table_y: float = 420.0
    gaze_pitch: float = -20.0     # fixed downward pitch; yaw is solved per frame
    object_size: tuple = (36.0, 90.0)
    object_class: str = "bottle"
    image_width: float = 640.0
    action_label: str | None = None
    session_id: str = "sim"
    seed: int = 0


@dataclass(frozen=True)
class GroundTruth:
    true_gazing_frame: int
    true_touch_frame: int
    true_place_frame: int | None
    true_anticipation_seconds: float


def min_jerk(tau: float) -> float:
    """Normalized minimum-jerk position profile on [0, 1]."""
    t = min(max(tau, 0.0), 1.0)
    return 10.0 * t**3 - 15.0 * t**4 + 6.0 * t**5


_TAU_AT_GOAL: dict[float, float] = {}


def _tau_at_goal(overshoot: float) -> float:
    """Profile phase at which a path aimed (1+overshoot) long crosses its goal."""
    tau = _TAU_AT_GOAL.get(overshoot)
    if tau is None:
        want = 1.0 / (1.0 + overshoot)
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = (lo + hi) / 2.0
            if min_jerk(mid) < want:
                lo = mid
            else:
                hi = mid
        tau = (lo + hi) / 2.0
        _TAU_AT_GOAL[overshoot] = tau
    return tau


def _approach(
    frame: int,
    start: int,
    arrive: int,
    p0: np.ndarray,
    goal: np.ndarray,
    onset: float,
    overshoot: float = OVERSHOOT_AIM,
) -> np.ndarray:
    """Minimum-jerk move aimed past the goal, saturating exactly at arrival.

    With onset > 0 the motion is already underway at `start`, mirroring a
    recording that begins after movement onset. From `arrive` onward the
    returned position is the goal itself (contact or fixation holds it).
    """
    if frame >= arrive:
        return goal
    tau_star = _tau_at_goal(overshoot)
    if frame <= start:
        tau = onset
    else:
        tau = onset + (tau_star - onset) * (frame - start) / (arrive - start)
    u = min_jerk(tau) * (1.0 + overshoot)
    return p0 + (goal - p0) * u


@dataclass(frozen=True)
class _Timeline:
    n_frames: int
    gazing: int
    touch: int
    place: int | None
    gazing2: int | None     # frame the gaze settles on the transport target
    turn2_start: int | None


def _plan_timeline(cfg: SimConfig) -> _Timeline:
    fps = cfg.fps
    touch = int(round(cfg.reach_duration * fps))
    lead = int(round(cfg.head_lead * fps))
    gazing = touch - lead
    if gazing < 1:
        raise InvalidScenario(
            f"head_lead {cfg.head_lead}s leaves no room before the touch at {cfg.reach_duration}s"
        )
    place = None
    gazing2 = None
    turn2_start = None
    if cfg.kind == "transport":
        place = touch + int(round(cfg.carry_duration * fps))
        gazing2 = place - lead
        if gazing2 < touch + 2:
            raise InvalidScenario(
                f"carry_duration {cfg.carry_duration}s too short for head_lead {cfg.head_lead}s"
            )
        turn2_start = max(touch - int(round(cfg.pregaze_turn * fps)), gazing + 1)
    last_event = place if place is not None else touch
    if cfg.duration is None:
        n_frames = last_event + int(round(cfg.post_roll * fps)) + 1
    else:
        n_frames = int(round(cfg.duration * fps))
        if n_frames < last_event + 2:
            raise InvalidScenario(f"duration {cfg.duration}s ends before the final event")
    return _Timeline(n_frames, gazing, touch, place, gazing2, turn2_start)


def _yaw_for_gaze_x(cfg: SimConfig, gaze_x: float) -> float:
    """Yaw (degrees) whose image-projected axis hits the table line at gaze_x."""
    drop = cfg.table_y - cfg.head_origin[1]
    if drop <= 0:
        raise InvalidScenario("table line must lie below the head origin")
    r = (gaze_x - cfg.head_origin[0]) / drop
    sin_yaw = r * math.tan(math.radians(-cfg.gaze_pitch))
    if abs(sin_yaw) >= 0.999:
        raise InvalidScenario(f"gaze target x={gaze_x} not in front of the head origin")
    return math.degrees(math.asin(sin_yaw))


def _validate(cfg: SimConfig) -> None:
    if cfg.fps <= 0:
        raise ValueError("fps must be positive")
    if not 0.0 <= cfg.dropout_rate < 1.0:
        raise ValueError("dropout_rate must be in [0, 1)")
    if cfg.head_lead < 0:
        raise ValueError("head_lead must be >= 0")
    if cfg.noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if cfg.kind not in ("reach", "transport"):
        raise ValueError(f"kind must be 'reach' or 'transport', got {cfg.kind!r}")
    if not 0.0 <= cfg.onset_phase < _tau_at_goal(OVERSHOOT_AIM):
        raise ValueError("onset_phase must lie before the goal-crossing phase")
    if cfg.gaze_pitch >= 0:
        raise InvalidScenario("gaze_pitch must point downward (negative)")


def simulate_session(cfg: SimConfig) -> tuple[Session, GroundTruth]:
    """Generate one schema-valid session plus its ground truth.

    Deterministic given the config (the RNG seed is part of it). The gaze
    point reaches the goal at the ground-truth gazing frame; the wrist
    reaches the object head_lead seconds later; for transports the object
    is then carried to the target position, arriving head_lead seconds
    after the head turned there.
    """
    _validate(cfg)
    tl = _plan_timeline(cfg)
    rng = np.random.default_rng(cfg.seed)
    fps = cfg.fps

    obj = np.array(cfg.object_start, dtype=float)
    target = np.array(cfg.target_position, dtype=float)
    head = np.array(cfg.head_origin, dtype=float)
    rest = np.array(cfg.wrist_rest, dtype=float)
    half_w, half_h = cfg.object_size[0] / 2.0, cfg.object_size[1] / 2.0
    gaze_rest = np.array([head[0], cfg.table_y])
    gaze_obj = np.array([obj[0], cfg.table_y])
    gaze_target = np.array([target[0], cfg.table_y])
    drift_dir = np.array(_GRIP_DRIFT_DIR)
    nudge_dir = np.array(_PLACE_NUDGE_DIR)

    # solvability check for the extreme gaze targets
    for x in (head[0], obj[0], target[0] if cfg.kind == "transport" else obj[0]):
        _yaw_for_gaze_x(cfg, x)

    frames = []
    for f in range(tl.n_frames):
        # --- noiseless scene state -------------------------------------
        if cfg.kind == "transport" and f >= tl.turn2_start:
            gaze_x = _approach(f, tl.turn2_start, tl.gazing2, gaze_obj, gaze_target, cfg.onset_phase)[0]
            # after fixating the drop point the gaze eases toward the
            # incoming object
            gaze_x += math.copysign(1.0, obj[0] - target[0]) * _drift(
                f, tl.gazing2, GAZE_DRIFT_PER_FRAME, GAZE_DRIFT_CAP
            )
        else:
            gaze_x = _approach(f, 0, tl.gazing, gaze_rest, gaze_obj, cfg.onset_phase)[0]
            if cfg.kind == "reach":
                # fixation drifts toward the approaching hand
                gaze_x += math.copysign(1.0, rest[0] - obj[0]) * _drift(
                    f, tl.gazing, GAZE_DRIFT_PER_FRAME, GAZE_DRIFT_CAP
                )

        if cfg.kind == "transport" and f >= tl.touch:
            carry_onset = min(cfg.onset_phase, CARRY_ONSET_PHASE)
            obj_pos = _approach(f, tl.touch, tl.place, obj, target, carry_onset)
            obj_pos = obj_pos + nudge_dir * _drift(f, tl.place, PLACE_NUDGE_PER_FRAME, PLACE_NUDGE_CAP)
        else:
            obj_pos = obj
        if f >= tl.touch:
            # wrist rides the grasped object; the grip point shifts a
            # little after settling so the d_H minimum stays localized
            grip = _drift(f, tl.touch, GRIP_DRIFT_PER_FRAME, GRIP_DRIFT_CAP)
            wrist = obj_pos + drift_dir * grip if grip > 0 else obj_pos
        else:
            wrist = _approach(f, 0, tl.touch, rest, obj, cfg.onset_phase)

        yaw = _yaw_for_gaze_x(cfg, gaze_x)
        roll = 8.0 * math.sin(2.0 * math.pi * f / (1.5 * fps))
        pose = HeadPose(yaw=yaw, pitch=cfg.gaze_pitch, roll=roll, confidence=POSE_CONF)

        # --- channel dropout --------------------------------------------
        n_channels = len(FACE_OFFSETS) + 4  # face, two wrists, detection, head pose
        drops = rng.random(n_channels) < cfg.dropout_rate if cfg.dropout_rate > 0 else np.zeros(n_channels, bool)

        def noisy(v: float) -> float:
            return v + rng.normal(0.0, cfg.noise_sigma) if cfg.noise_sigma > 0 else v

        keypoints = []
        for ch, (kp_id, dx, dy) in enumerate(FACE_OFFSETS):
            if drops[ch]:
                continue
            keypoints.append(
                Keypoint(kp_id, noisy(head[0] + dx), noisy(head[1] + dy), math.nan, KEYPOINT_CONF)
            )
        if not drops[len(FACE_OFFSETS)]:
            keypoints.append(Keypoint("r_wrist", noisy(wrist[0]), noisy(wrist[1]), math.nan, KEYPOINT_CONF))
        if not drops[len(FACE_OFFSETS) + 1]:
            keypoints.append(
                Keypoint("l_wrist", noisy(cfg.off_wrist_rest[0]), noisy(cfg.off_wrist_rest[1]), math.nan, KEYPOINT_CONF)
            )

        detections = []
        if not drops[len(FACE_OFFSETS) + 2]:
            xs = sorted((noisy(obj_pos[0] - half_w), noisy(obj_pos[0] + half_w)))
            ys = sorted((noisy(obj_pos[1] - half_h), noisy(obj_pos[1] + half_h)))
            detections.append(Detection(cfg.object_class, xs[0], ys[0], xs[1], ys[1], BOX_CONF))

        head_pose = None if drops[len(FACE_OFFSETS) + 3] else pose

        frames.append(
            FrameRecord(
                frame_index=f,
                timestamp=f / fps,
                keypoints=tuple(keypoints),
                detections=tuple(detections),
                head_pose=head_pose,
            )
        )

    lead_frames = int(round(cfg.head_lead * fps))
    truth = GroundTruth(
        true_gazing_frame=tl.gazing,
        true_touch_frame=tl.touch,
        true_place_frame=tl.place,
        true_anticipation_seconds=-lead_frames / fps,
    )
    label = cfg.action_label or f"{cfg.kind} {cfg.object_class}"
    session = Session(cfg.session_id, fps, label, tuple(frames))
    return session, truth


def scene_for(cfg: SimConfig, split_margin: int = DEFAULT_SPLIT_MARGIN) -> SceneConfig:
    """SceneConfig matching a simulated scene's geometry and targets."""
    targets = [TargetSpec(kind="object", object_class=cfg.object_class)]
    if cfg.kind == "transport":
        targets.append(
            TargetSpec(
                kind="position",
                object_class=cfg.object_class,
                target_position=np.array([cfg.target_position[0], cfg.target_position[1], 0.0]),
            )
        )
    return SceneConfig(
        projection_mode="MODE_2D",
        table_line=TableLine(
            p0=np.array([0.0, cfg.table_y]), p1=np.array([cfg.image_width, cfg.table_y])
        ),
        targets=targets,
        hand="right",
        split_margin=split_margin,
    )


# --- Benchmark generation --------------------------------------------------

# Mirrors the four analyzed tabletop actions: three side-of-table bottle
# actions and one frontal glass action with a weaker gaze sweep.
BENCHMARK_ACTIONS = (
    ("transport bottle", "transport", "bottle", 540.0),
    ("touch bottle", "reach", "bottle", 540.0),
    ("open-close bottle", "reach", "bottle", 540.0),
    ("drinking", "reach", "glass", 470.0),
)


def draw_leads(n: int, lead_range: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    lo, hi = lead_range
    if not 0.0 <= lo <= hi:
        raise ValueError(f"invalid lead_range: {lead_range}")
    return rng.uniform(lo, hi, size=n)


def benchmark_scene(fps: float = 30.0) -> SceneConfig:
    """One SceneConfig covering all benchmark actions via target filters."""
    base = SimConfig(fps=fps)
    reach_labels = tuple(a[0] for a in BENCHMARK_ACTIONS)
    targets = [
        TargetSpec(kind="object", object_class="bottle",
                   action_labels=tuple(l for l in reach_labels if "bottle" in l)),
        TargetSpec(kind="object", object_class="glass", action_labels=("drinking",)),
        TargetSpec(kind="position", object_class="bottle",
                   target_position=np.array([base.target_position[0], base.target_position[1], 0.0]),
                   action_labels=("transport bottle",)),
    ]
    return SceneConfig(
        projection_mode="MODE_2D",
        table_line=TableLine(p0=np.array([0.0, base.table_y]),
                             p1=np.array([base.image_width, base.table_y])),
        targets=targets,
        hand="right",
    )


def make_benchmark(
    out_dir,
    n_per_action: int = 32,
    lead_range: tuple[float, float] = (0.3, 0.7),
    seed: int = 0,
    noise_sigma: float = 0.0,
    dropout_rate: float = 0.0,
    fps: float = 30.0,
) -> list[dict]:
    """Write a benchmark of sessions plus a ground-truth manifest.

    Produces n_per_action sessions for each of the four benchmark actions,
    with head leads drawn uniformly from lead_range. Writes one session
    file per recording, `manifest.jsonl` mapping session ids to ground
    truth, and `scene.json` ready for the analyze command. Deterministic
    given the seed; returns the manifest records.
    """
    if n_per_action < 1:
        raise ValueError("n_per_action must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest: list[dict] = []
    for label, kind, obj_class, obj_x in BENCHMARK_ACTIONS:
        leads = draw_leads(n_per_action, lead_range, rng)
        seeds = rng.integers(0, 2**31 - 1, size=n_per_action)
        slug = label.replace(" ", "-")
        for i in range(n_per_action):
            base = SimConfig(fps=fps)
            cfg = SimConfig(
                fps=fps,
                kind=kind,
                head_lead=float(leads[i]),
                noise_sigma=noise_sigma,
                dropout_rate=dropout_rate,
                object_start=(obj_x, base.table_y),
                object_class=obj_class,
                action_label=label,
                session_id=f"{slug}-{i:03d}",
                seed=int(seeds[i]),
            )
            session, truth = simulate_session(cfg)
            write_session(session, os.path.join(out_dir, f"{cfg.session_id}.jsonl"))
            manifest.append(
                {
                    "session_id": cfg.session_id,
                    "true_gazing_frame": truth.true_gazing_frame,
                    "true_touch_frame": truth.true_touch_frame,
                    "true_place_frame": truth.true_place_frame,
                    "true_anticipation_seconds": truth.true_anticipation_seconds,
                }
            )

    with open(os.path.join(out_dir, "manifest.jsonl"), "w", encoding="utf-8") as fh:
        for record in manifest:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    from .config import scene_config_to_dict

    with open(os.path.join(out_dir, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(scene_config_to_dict(benchmark_scene(fps)), fh, indent=2)
        fh.write("\n")
    return manifest
