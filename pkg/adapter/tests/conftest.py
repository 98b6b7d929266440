import math

import cv2
import numpy as np
import pytest

from tabletop_adapter.backends import (
    MARKER_COLORS,
    PITCH_DEG_PER_RATIO,
    PITCH_NEUTRAL_RATIO,
    YAW_SIN_PER_OFFSET,
)

SHIFT = 4  # fixed-point bits for sub-pixel marker placement
WIDTH, HEIGHT = 640, 480
TABLE_Y = 400.0
EYE_Y = 70.0
EYE_HALF_SPAN = 24.0
FACE_MID_X = 320.0
BOTTLE_CENTER = (520.0, 400.0)
BOTTLE_SIZE = (36.0, 90.0)
BOTTLE_BGR = (160, 60, 30)
WRIST_REST = (430.0, 460.0)
OFF_WRIST = (200.0, 460.0)


def _dot(img, x, y, bgr, radius=6):
    cv2.circle(
        img,
        (int(round(x * (1 << SHIFT))), int(round(y * (1 << SHIFT)))),
        radius << SHIFT,
        bgr,
        -1,
        lineType=cv2.LINE_8,
        shift=SHIFT,
    )


# the head leans slightly while turning; the anchor translation keeps the
# projected gaze strictly moving even where video compression collapses
# the sub-pixel nose offset between adjacent frames
FACE_LEAN = 12.0


def nose_position(yaw_deg: float, pitch_deg: float = -20.0, mid_x: float = FACE_MID_X):
    """Marker placement that the facial-geometry backend will read back
    as the requested yaw/pitch."""
    interocular = 2 * EYE_HALF_SPAN
    dx = math.sin(math.radians(yaw_deg)) * interocular / YAW_SIN_PER_OFFSET
    ratio = PITCH_NEUTRAL_RATIO - pitch_deg / PITCH_DEG_PER_RATIO
    return mid_x + dx, EYE_Y + ratio * interocular


def settled_yaw_for_gaze_x(target_x: float, pitch_deg: float = -20.0, mid_x: float = FACE_MID_X) -> float:
    """Yaw whose projected head axis meets the table line at target_x.

    Mirrors the engine's 2D projection; used only to script the scenario.
    """
    pitch = math.radians(pitch_deg)
    lo, hi = 0.0, 60.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        nx, ny = nose_position(mid, pitch_deg, mid_x)
        hit = nx + (TABLE_Y - ny) * math.sin(math.radians(mid)) * math.cos(pitch) / -math.sin(pitch)
        if hit < target_x:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def draw_frame(yaw_deg, wrist_xy, with_face=True, with_bottle=True, mid_x=FACE_MID_X):
    img = np.full((HEIGHT, WIDTH, 3), 255, np.uint8)
    if with_bottle:
        x0 = BOTTLE_CENTER[0] - BOTTLE_SIZE[0] / 2
        y0 = BOTTLE_CENTER[1] - BOTTLE_SIZE[1] / 2
        cv2.rectangle(
            img,
            (int(x0), int(y0)),
            (int(x0 + BOTTLE_SIZE[0]), int(y0 + BOTTLE_SIZE[1])),
            BOTTLE_BGR,
            -1,
        )
    if with_face:
        nx, ny = nose_position(yaw_deg, mid_x=mid_x)
        _dot(img, mid_x - EYE_HALF_SPAN, EYE_Y, MARKER_COLORS["left_eye"])
        _dot(img, mid_x + EYE_HALF_SPAN, EYE_Y, MARKER_COLORS["right_eye"])
        _dot(img, mid_x - 38, EYE_Y + 6, MARKER_COLORS["left_ear"])
        _dot(img, mid_x + 38, EYE_Y + 6, MARKER_COLORS["right_ear"])
        _dot(img, nx, ny, MARKER_COLORS["nose"])
    _dot(img, *wrist_xy, MARKER_COLORS["right_wrist"])
    _dot(img, *OFF_WRIST, MARKER_COLORS["left_wrist"])
    return img


def reach_plan(n_frames=90, turn_end=25, touch=60, occlusion=(70, 73)):
    """Per-frame (yaw, wrist, face_visible, mid_x) for a scripted reach."""
    final_mid = FACE_MID_X + FACE_LEAN
    yaw_star = settled_yaw_for_gaze_x(BOTTLE_CENTER[0], mid_x=final_mid)
    plan = []
    for f in range(n_frames):
        progress = min(1.0, f / turn_end)
        yaw = yaw_star * progress
        mid_x = FACE_MID_X + FACE_LEAN * progress
        s = min(1.0, f / touch)
        wrist = (
            WRIST_REST[0] + (BOTTLE_CENTER[0] - WRIST_REST[0]) * s,
            WRIST_REST[1] + (BOTTLE_CENTER[1] - WRIST_REST[1]) * s,
        )
        visible = not (occlusion[0] <= f < occlusion[1])
        plan.append((yaw, wrist, visible, mid_x))
    return plan


@pytest.fixture(scope="session")
def tabletop_video(tmp_path_factory):
    """A short synthetic tabletop reach clip plus its scripted plan."""
    path = tmp_path_factory.mktemp("video") / "reach_bottle.avi"
    plan = reach_plan()
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), 30.0, (WIDTH, HEIGHT))
    assert writer.isOpened()
    for yaw, wrist, visible, mid_x in plan:
        writer.write(draw_frame(yaw, wrist, with_face=visible, mid_x=mid_x))
    writer.release()
    return str(path), plan
