import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from headlead.ingest import (
    HeadPose,
    Keypoint,
    ParseError,
    interp_angle_deg,
    parse_session,
    repair_gaps,
    serialize_session,
    wrap_angle_deg,
)
from headlead.sim import SimConfig, simulate_session

from conftest import det, frame, frame_line, header_line, kp, session


def parse_lines(*lines):
    return parse_session("\n".join(lines))


class TestParseSession:
    def test_minimal_two_frame_session(self):
        s = parse_lines(header_line(), frame_line(0), frame_line(1))
        assert s.session_id == "test"
        assert s.fps == 30.0
        assert [f.frame_index for f in s.frames] == [0, 1]

    def test_timestamps_consistent_with_declared_fps(self):
        # 15 frames apart at 30 fps must span 0.5 s
        s = parse_lines(
            header_line(fps=30),
            json.dumps({"type": "frame", "frame_index": 0, "timestamp": 0.0}),
            json.dumps({"type": "frame", "frame_index": 15, "timestamp": 0.5}),
        )
        assert len(s.frames) == 2

    def test_confidence_out_of_range_names_field_and_line(self):
        bad = frame_line(1, keypoints=[{"id": "nose", "x": 1.0, "y": 2.0, "conf": 1.7}])
        with pytest.raises(ParseError) as err:
            parse_lines(header_line(), frame_line(0), bad)
        assert "conf" in str(err.value)
        assert "line 3" in str(err.value)
        assert err.value.line == 3

    def test_missing_header_is_an_error(self):
        with pytest.raises(ParseError, match="header"):
            parse_lines(frame_line(0))

    def test_header_missing_fps(self):
        with pytest.raises(ParseError, match="fps"):
            parse_lines(json.dumps({"type": "header", "session_id": "x"}))

    def test_duplicate_frame_index(self):
        with pytest.raises(ParseError, match="duplicate frame_index"):
            parse_lines(header_line(), frame_line(3), frame_line(3))

    def test_non_monotone_timestamp(self):
        lines = [
            header_line(),
            json.dumps({"type": "frame", "frame_index": 0, "timestamp": 0.1}),
            json.dumps({"type": "frame", "frame_index": 1, "timestamp": 0.0}),
        ]
        with pytest.raises(ParseError, match="timestamp"):
            parse_lines(*lines)

    def test_timestamp_drift_beyond_one_frame_period(self):
        lines = [
            header_line(fps=30),
            json.dumps({"type": "frame", "frame_index": 0, "timestamp": 0.0}),
            json.dumps({"type": "frame", "frame_index": 1, "timestamp": 0.2}),
        ]
        with pytest.raises(ParseError, match="inconsistent"):
            parse_lines(*lines)

    def test_unknown_fields_are_ignored(self):
        s = parse_lines(header_line(), frame_line(0, camera="left", debug=[1, 2]))
        assert len(s.frames) == 1

    def test_malformed_json_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_lines(header_line(), "{not json")

    def test_box_ordering_enforced(self):
        bad = frame_line(0, detections=[{"class": "cup", "x0": 10, "y0": 0, "x1": 5, "y1": 5, "conf": 0.5}])
        with pytest.raises(ParseError, match="box"):
            parse_lines(header_line(), bad)

    def test_missing_z_is_unavailable(self):
        s = parse_lines(
            header_line(),
            frame_line(0, keypoints=[{"id": "nose", "x": 1.0, "y": 2.0, "conf": 0.5}]),
        )
        assert not s.frames[0].keypoints[0].has_z

    def test_pitch_out_of_range_rejected(self):
        bad = frame_line(0, head_pose={"yaw": 0, "pitch": 100, "roll": 0, "conf": 0.9})
        with pytest.raises(ParseError, match="pitch"):
            parse_lines(header_line(), bad)


class TestRoundTrip:
    def test_handcrafted_session_round_trips(self):
        s = session(
            [
                frame(0, keypoints=[kp("nose", 1.5, 2.25, 900.0)], detections=[det("cup", 0, 0, 4, 4)]),
                frame(1, head_pose=HeadPose(10.0, -5.0, 3.0, 0.75)),
                frame(5, keypoints=[kp("r_wrist", 7.125, 8.5)]),
            ],
            action_label="touch cup",
        )
        assert parse_session(serialize_session(s)) == s

    def test_simulated_sessions_round_trip(self):
        for kind in ("reach", "transport"):
            s, _ = simulate_session(SimConfig(kind=kind, noise_sigma=1.5, dropout_rate=0.1, seed=5))
            assert parse_session(serialize_session(s)) == s

    def test_serialization_is_single_pass_friendly(self):
        s, _ = simulate_session(SimConfig(seed=2))
        text = serialize_session(s)
        # one record per line, header first
        lines = text.strip().split("\n")
        assert json.loads(lines[0])["type"] == "header"
        assert len(lines) == len(s.frames) + 1


class TestAngles:
    def test_wrap_examples(self):
        assert wrap_angle_deg(190.0) == -170.0
        assert wrap_angle_deg(-190.0) == 170.0
        assert wrap_angle_deg(180.0) == 180.0
        assert wrap_angle_deg(540.0) == 180.0

    def test_seam_midpoint_is_180(self):
        # the seam case: halfway between 179 and -179 is 180, not 0
        assert interp_angle_deg(179.0, -179.0, 0.5) == 180.0

    @given(
        a=st.floats(-180.0, 180.0),
        b=st.floats(-180.0, 180.0),
        frac=st.floats(0.0, 1.0),
    )
    def test_interp_agrees_with_circle_lift_oracle(self, a, b, frac):
        # oracle: lift to unit vectors, rotate by the signed angle between them
        va = np.array([math.cos(math.radians(a)), math.sin(math.radians(a))])
        vb = np.array([math.cos(math.radians(b)), math.sin(math.radians(b))])
        signed = math.degrees(math.atan2(va[0] * vb[1] - va[1] * vb[0], float(va @ vb)))
        expected = math.radians(a + frac * signed)
        got = math.radians(interp_angle_deg(a, b, frac))
        # compare as points on the circle to ignore wrapping differences
        assert math.hypot(math.cos(got) - math.cos(expected), math.sin(got) - math.sin(expected)) < 1e-9


class TestRepairGaps:
    def _pose_session(self, poses):
        frames = [frame(i, head_pose=p) for i, p in enumerate(poses)]
        return session(frames)

    def test_single_frame_pose_gap_gets_midpoint(self):
        poses = [HeadPose(10.0, 0.0, 0.0, 0.8), None, HeadPose(20.0, 10.0, 4.0, 0.6)]
        repaired = repair_gaps(self._pose_session(poses), max_gap=5)
        mid = repaired.frames[1].head_pose
        assert mid is not None
        assert mid.yaw == pytest.approx(15.0)
        assert mid.pitch == pytest.approx(5.0)
        assert mid.roll == pytest.approx(2.0)
        assert mid.confidence == pytest.approx(0.7)

    def test_gap_longer_than_max_gap_stays_missing(self):
        poses = [HeadPose(0.0, 0.0, 0.0, 1.0)] + [None] * 9 + [HeadPose(9.0, 0.0, 0.0, 1.0)]
        repaired = repair_gaps(self._pose_session(poses), max_gap=5)
        assert all(f.head_pose is None for f in repaired.frames[1:10])

    def test_yaw_seam_interpolates_on_shortest_arc(self):
        poses = [HeadPose(179.0, 0.0, 0.0, 1.0), None, HeadPose(-179.0, 0.0, 0.0, 1.0)]
        repaired = repair_gaps(self._pose_session(poses), max_gap=5)
        assert repaired.frames[1].head_pose.yaw == pytest.approx(180.0)

    def test_keypoint_gap_fill(self):
        frames = [
            frame(0, keypoints=[kp("nose", 100, 200, 900)]),
            frame(1),
            frame(2, keypoints=[kp("nose", 104, 208, 908)]),
        ]
        repaired = repair_gaps(session(frames), max_gap=5)
        filled = repaired.frames[1].keypoints[0]
        assert (filled.x, filled.y, filled.z) == (102.0, 204.0, 904.0)

    def test_detection_gap_fill_single_instance_only(self):
        frames = [
            frame(0, detections=[det("cup", 0, 0, 10, 10)]),
            frame(1),
            frame(2, detections=[det("cup", 4, 4, 14, 14), det("cup", 90, 90, 95, 95)]),
        ]
        repaired = repair_gaps(session(frames), max_gap=5)
        # two instances at the right endpoint: ambiguous, no fill
        assert repaired.frames[1].detections == ()

    def test_idempotent(self):
        s, _ = simulate_session(SimConfig(kind="transport", dropout_rate=0.15, seed=9))
        once = repair_gaps(s, max_gap=5)
        twice = repair_gaps(once, max_gap=5)
        assert once == twice

    def test_max_gap_zero_is_identity(self):
        s, _ = simulate_session(SimConfig(dropout_rate=0.2, seed=3))
        assert repair_gaps(s, max_gap=0) == s

    def test_original_session_untouched(self):
        s = self._pose_session([HeadPose(0.0, 0.0, 0.0, 1.0), None, HeadPose(2.0, 0.0, 0.0, 1.0)])
        repair_gaps(s, max_gap=5)
        assert s.frames[1].head_pose is None

    def test_boundary_gaps_never_extrapolated(self):
        poses = [None, HeadPose(5.0, 0.0, 0.0, 1.0), None]
        repaired = repair_gaps(self._pose_session(poses), max_gap=5)
        assert repaired.frames[0].head_pose is None
        assert repaired.frames[2].head_pose is None
