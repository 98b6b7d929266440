import math

import numpy as np
import pytest

from tabletop_adapter.backends import (
    FacialGeometryHeadPoseBackend,
    HsvObjectBackend,
    KeypointObs,
    MarkerPoseBackend,
    AdapterError,
    make_backend,
    POSE_BACKENDS,
)

from conftest import BOTTLE_CENTER, BOTTLE_SIZE, draw_frame, nose_position


class TestMarkerPoseBackend:
    def test_finds_all_visible_markers(self):
        frame = draw_frame(yaw_deg=0.0, wrist_xy=(430.0, 460.0))
        found = {kp.id: kp for kp in MarkerPoseBackend().detect(frame)}
        assert set(found) == {
            "nose",
            "left_eye",
            "right_eye",
            "left_ear",
            "right_ear",
            "left_wrist",
            "right_wrist",
        }
        assert all(kp.conf > 0.5 for kp in found.values())
        assert found["left_eye"].x < found["right_eye"].x

    def test_centroids_land_on_marker_positions(self):
        frame = draw_frame(yaw_deg=0.0, wrist_xy=(433.25, 461.5))
        found = {kp.id: kp for kp in MarkerPoseBackend().detect(frame)}
        assert found["right_wrist"].x == pytest.approx(433.25, abs=0.5)
        assert found["right_wrist"].y == pytest.approx(461.5, abs=0.5)

    def test_occluded_face_yields_no_facial_markers(self):
        frame = draw_frame(yaw_deg=0.0, wrist_xy=(430.0, 460.0), with_face=False)
        found = {kp.id for kp in MarkerPoseBackend().detect(frame)}
        assert found == {"left_wrist", "right_wrist"}


class TestHsvObjectBackend:
    def test_bottle_box_recovered(self):
        frame = draw_frame(yaw_deg=0.0, wrist_xy=(430.0, 460.0))
        (box,) = HsvObjectBackend().detect(frame)
        assert box.class_label == "bottle"
        cx, cy = (box.x0 + box.x1) / 2, (box.y0 + box.y1) / 2
        assert cx == pytest.approx(BOTTLE_CENTER[0], abs=1.5)
        assert cy == pytest.approx(BOTTLE_CENTER[1], abs=1.5)
        assert box.x1 - box.x0 == pytest.approx(BOTTLE_SIZE[0], abs=3)

    def test_no_bottle_no_detection(self):
        frame = draw_frame(yaw_deg=0.0, wrist_xy=(430.0, 460.0), with_bottle=False)
        assert HsvObjectBackend().detect(frame) == []


class TestFacialGeometryHeadPose:
    def estimate_from_markers(self, yaw_deg):
        frame = draw_frame(yaw_deg=yaw_deg, wrist_xy=(430.0, 460.0))
        keypoints = MarkerPoseBackend().detect(frame)
        return FacialGeometryHeadPoseBackend().estimate(frame, keypoints)

    def test_neutral_pose_recovered(self):
        pose = self.estimate_from_markers(0.0)
        assert pose is not None
        assert pose.yaw == pytest.approx(0.0, abs=1.5)
        assert pose.pitch == pytest.approx(-20.0, abs=2.0)
        assert pose.roll == pytest.approx(0.0, abs=1.5)

    def test_yaw_sweep_recovered(self):
        for yaw in (-20.0, -8.0, 8.0, 20.0):
            pose = self.estimate_from_markers(yaw)
            assert pose.yaw == pytest.approx(yaw, abs=2.0)

    def test_missing_eyes_returns_none(self):
        backend = FacialGeometryHeadPoseBackend()
        keypoints = [KeypointObs("nose", 320.0, 90.0, None, 0.9)]
        assert backend.estimate(np.zeros((4, 4, 3), np.uint8), keypoints) is None


def test_unknown_backend_fails_loudly():
    with pytest.raises(AdapterError, match="unknown pose backend"):
        make_backend(POSE_BACKENDS, "neural-v99", "pose")
