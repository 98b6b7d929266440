"""Adapter acceptance: the exported session flows through the engine.

The engine is exercised strictly through its external interfaces: the
session-file schema and the headlead command line.
"""

import json
import subprocess
import sys

import pytest

from tabletop_adapter.export import AdapterConfig, export_session

ENGINE = [sys.executable, "-m", "headlead.cli"]


def engine_scene(path):
    scene = {
        "projection_mode": "MODE_2D",
        "table_line": [[0.0, 400.0], [640.0, 400.0]],
        "targets": [{"kind": "object", "object_class": "bottle"}],
        "hand": "right",
        "windows": {"auto_split": True},
    }
    path.write_text(json.dumps(scene))
    return str(path)


def test_criterion_8_export_parses_and_analyzes(tabletop_video, tmp_path):
    video, plan = tabletop_video
    session_path = tmp_path / "clip.jsonl"
    _, n_frames = export_session(
        AdapterConfig(video_path=video, out_path=str(session_path), session_id="clip", action_label="touch bottle")
    )
    assert n_frames == len(plan)

    scene = engine_scene(tmp_path / "scene.json")
    out = tmp_path / "out"
    proc = subprocess.run(
        ENGINE + ["analyze", "--config", scene, "--out", str(out), str(session_path)],
        capture_output=True,
    )
    # exit 0 == the session parsed with zero diagnostics and produced events
    assert proc.returncode == 0, proc.stderr.decode()

    records = [json.loads(l) for l in (out / "clip.events.jsonl").read_text().splitlines()]
    assert len(records) == 1
    record = records[0]
    assert set(record) == {
        "session_id",
        "action_label",
        "phase",
        "gazing_frame",
        "hand_event_frame",
        "anticipation_seconds",
    }
    assert record["phase"] == "reach"
    # the scripted head turn settles well before the hand arrives
    assert record["anticipation_seconds"] < 0.0
    assert abs(record["anticipation_seconds"]) < 2.0
    ok = record["gazing_frame"] < record["hand_event_frame"]
    print(
        f"[ADAPTER ACCEPTANCE 8] {'PASS' if ok else 'FAIL'}: exported {n_frames}-frame clip "
        f"analyzed cleanly; gazing {record['gazing_frame']} precedes hand event "
        f"{record['hand_event_frame']} ({record['anticipation_seconds']:+.3f}s)"
    )
    assert ok


def test_export_pipes_into_stream(tabletop_video, tmp_path):
    video, _ = tabletop_video
    session_path = tmp_path / "clip.jsonl"
    export_session(AdapterConfig(video_path=video, out_path=str(session_path), session_id="clip", action_label="touch bottle"))
    scene = engine_scene(tmp_path / "scene.json")

    out = tmp_path / "out"
    analyze = subprocess.run(
        ENGINE + ["analyze", "--config", scene, "--out", str(out), str(session_path)],
        capture_output=True,
    )
    assert analyze.returncode == 0, analyze.stderr.decode()
    batch = (out / "clip.events.jsonl").read_bytes()

    stream = subprocess.run(
        ENGINE + ["stream", "--config", scene],
        input=session_path.read_bytes(),
        capture_output=True,
    )
    assert stream.returncode == 0, stream.stderr.decode()
    assert stream.stdout == batch
