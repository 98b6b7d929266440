import io
import json
import os
import subprocess
import sys

import pytest

from headlead.cli import main
from headlead.config import scene_config_to_dict
from headlead.ingest import write_session
from headlead.sim import SimConfig, scene_for, simulate_session


def write_scene(path, cfg: SimConfig):
    with open(path, "w") as fh:
        json.dump(scene_config_to_dict(scene_for(cfg)), fh)


@pytest.fixture
def reach_setup(tmp_path):
    cfg = SimConfig(kind="reach", head_lead=0.5, seed=3, session_id="cli-reach")
    session, truth = simulate_session(cfg)
    session_path = tmp_path / "cli-reach.jsonl"
    write_session(session, session_path)
    scene_path = tmp_path / "scene.json"
    write_scene(scene_path, cfg)
    return cfg, session, truth, session_path, scene_path


class TestAnalyze:
    def test_single_session_outputs(self, reach_setup, tmp_path, capsys):
        cfg, session, truth, session_path, scene_path = reach_setup
        out = tmp_path / "out"
        code = main(["analyze", "--config", str(scene_path), "--out", str(out), str(session_path)])
        assert code == 0
        events = [json.loads(l) for l in (out / "cli-reach.events.jsonl").read_text().splitlines()]
        assert len(events) == 1
        assert set(events[0]) == {
            "session_id",
            "action_label",
            "phase",
            "gazing_frame",
            "hand_event_frame",
            "anticipation_seconds",
        }
        assert events[0]["anticipation_seconds"] == truth.true_anticipation_seconds
        csv_text = (out / "cli-reach.reach.signals.csv").read_text()
        assert csv_text.startswith("frame,t_seconds,d_g,d_h,d_o,valid_g,valid_h,valid_o\n")
        assert len(csv_text.splitlines()) == len(session) + 1
        assert (out / "report.csv").read_text().startswith("action,quantity,n,")
        assert (out / "report.txt").exists()

    def test_partial_failure_exit_code(self, reach_setup, tmp_path, capsys):
        cfg, _, _, session_path, scene_path = reach_setup
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        out = tmp_path / "out"
        code = main(["analyze", "--config", str(scene_path), "--out", str(out), str(bad), str(session_path)])
        assert code == 1
        # the good session was still processed
        assert (out / "cli-reach.events.jsonl").exists()

    def test_config_error_before_any_processing(self, reach_setup, tmp_path, capsys):
        _, _, _, session_path, _ = reach_setup
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps({"projection_mode": "MODE_3D", "targets": [{"kind": "object", "object_class": "x"}]}))
        out = tmp_path / "out2"
        code = main(["analyze", "--config", str(broken), "--out", str(out), str(session_path)])
        assert code == 2
        assert "table_plane" in capsys.readouterr().err
        assert not (out / "cli-reach.events.jsonl").exists()


class TestSimulateAndReport:
    def test_simulate_writes_benchmark(self, tmp_path, capsys):
        sim_cfg = tmp_path / "sim.json"
        sim_cfg.write_text(json.dumps({"n_per_action": 1, "seed": 11, "lead_range": [0.4, 0.6]}))
        out = tmp_path / "bench"
        assert main(["simulate", "--config", str(sim_cfg), "--out", str(out)]) == 0
        files = os.listdir(out)
        assert "manifest.jsonl" in files and "scene.json" in files
        assert sum(f.endswith(".jsonl") for f in files) == 5  # 4 sessions + manifest

    def test_end_to_end_benchmark_report(self, tmp_path, capsys):
        sim_cfg = tmp_path / "sim.json"
        sim_cfg.write_text(json.dumps({"n_per_action": 2, "seed": 4}))
        bench = tmp_path / "bench"
        assert main(["simulate", "--config", str(sim_cfg), "--out", str(bench)]) == 0
        sessions = sorted(str(p) for p in bench.glob("*.jsonl") if p.name != "manifest.jsonl")
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(bench / "scene.json"), "--out", str(out), *sessions]) == 0
        capsys.readouterr()
        assert main(["report", "--in", str(out), "--format", "csv"]) == 0
        report = capsys.readouterr().out
        lines = report.strip().splitlines()
        assert lines[0] == "action,quantity,n,mean_s,std_s,median_s"
        assert len(lines) == 6  # 4 reach rows + 1 transport row + header


class TestStreamCommand:
    def test_stream_matches_analyze_byte_for_byte(self, tmp_path):
        cfg = SimConfig(kind="transport", head_lead=0.6, seed=19, session_id="pipe")
        session, _ = simulate_session(cfg)
        session_path = tmp_path / "pipe.jsonl"
        write_session(session, session_path)
        scene_path = tmp_path / "scene.json"
        write_scene(scene_path, cfg)
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(scene_path), "--out", str(out), str(session_path)]) == 0
        batch_bytes = (out / "pipe.events.jsonl").read_bytes()

        proc = subprocess.run(
            [sys.executable, "-m", "headlead.cli", "stream", "--config", str(scene_path)],
            input=session_path.read_bytes(),
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        assert proc.stdout == batch_bytes

    def test_malformed_line_diagnostic_and_exit_one(self, tmp_path):
        cfg = SimConfig(kind="reach", seed=23, session_id="pipe2")
        session, _ = simulate_session(cfg)
        session_path = tmp_path / "pipe2.jsonl"
        write_session(session, session_path)
        scene_path = tmp_path / "scene.json"
        write_scene(scene_path, cfg)
        lines = session_path.read_text().splitlines()
        lines.insert(20, "@garbage@")
        proc = subprocess.run(
            [sys.executable, "-m", "headlead.cli", "stream", "--config", str(scene_path)],
            input="\n".join(lines).encode(),
            capture_output=True,
        )
        assert proc.returncode == 1
        assert b"line 21" in proc.stderr

    def test_header_only_stream_clean_exit(self, tmp_path):
        cfg = SimConfig(seed=1)
        scene_path = tmp_path / "scene.json"
        write_scene(scene_path, cfg)
        proc = subprocess.run(
            [sys.executable, "-m", "headlead.cli", "stream", "--config", str(scene_path)],
            input=b'{"type":"header","session_id":"empty","fps":30}\n',
            capture_output=True,
        )
        assert proc.stdout == b""
        assert proc.returncode == 0  # nothing malformed: clean exit, notices only
        assert b"not detected" in proc.stderr
