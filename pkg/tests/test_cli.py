import json
import subprocess
import sys

import httpx
import pytest

from argead.cli import main
from argead.client import MockServer
from argead.segmentation import FrameFeature, write_frames_csv


@pytest.fixture
def mock(fixture_ads):
    with MockServer(fixture_ads) as srv:
        yield srv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_staged_commands(capsys, tmp_path, data_dir, mock):
    common = ["--data-dir", data_dir, "--out", tmp_path]
    assert run(capsys, "ingest", *common)[0] == 0
    assert (tmp_path / "store.json").is_file()
    assert run(capsys, "context", *common)[0] == 0
    code, out, _ = run(capsys, "prompt", *common, "--prompt", "2", "--context", "pa+c")
    assert code == 0 and json.loads(out) == {"prompts": 10, "variant": "P2", "profile": "pa+c"}
    code, out, _ = run(capsys, "generate", *common, "--endpoint", mock.url)
    assert code == 0 and json.loads(out) == {"candidates": 10, "failures": 0}
    code, out, _ = run(capsys, "evaluate", *common)
    assert code == 0 and out.startswith("ARGE-AD 0.7000 over 10 clips")
    (tmp_path / "report.csv").unlink()
    code, out, _ = run(capsys, "report", "--out", tmp_path)
    assert code == 0 and (tmp_path / "report.csv").is_file()


def test_global_flags_before_subcommand(capsys, tmp_path, data_dir):
    code, out, _ = run(capsys, "--data-dir", data_dir, "--out", tmp_path, "--strict-actions", "evaluate",
                       "--candidates", data_dir / "candidates.jsonl")
    assert code == 0
    assert json.loads((tmp_path / "report.json").read_text())["config"]["action_mode"] == "strict"


def test_scorer_flags(capsys, tmp_path, data_dir):
    code, _, _ = run(capsys, "evaluate", "--data-dir", data_dir, "--out", tmp_path, "--candidates",
                     data_dir / "candidates.jsonl", "--wpm", "400", "--all-nouns")
    assert code == 0
    cfg = json.loads((tmp_path / "report.json").read_text())["config"]
    assert cfg["wpm"] == 400 and cfg["all_nouns"] is True


def test_run(capsys, tmp_path, data_dir, mock):
    code, out, _ = run(capsys, "run", "--data-dir", data_dir, "--out", tmp_path, "--endpoint", mock.url)
    assert code == 0 and "ARGE-AD 0.7000" in out
    assert (tmp_path / "manifest.json").is_file()


def test_run_with_config_file(capsys, tmp_path, data_dir, mock):
    (tmp_path / "run.yaml").write_text(f"inputs:\n  data_dir: {data_dir}\nout: o\nendpoint:\n  url: {mock.url}\n")
    code, _, _ = run(capsys, "run", "--config", tmp_path / "run.yaml", "--prompt", "1", "--context", "none")
    assert code == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["stages"]["prompt"]["variant"] == "P1" and manifest["stages"]["prompt"]["profile"] == "none"


def test_exit_codes(capsys, tmp_path, data_dir):
    assert run(capsys, "--prompt", "7", "run")[0] == 1
    assert run(capsys, "run", "--config", tmp_path / "missing.yaml")[0] == 1
    assert run(capsys)[0] == 1
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in ("games.json", "clips.jsonl", "context.jsonl"):
        (bad / name).write_bytes((data_dir / name).read_bytes())
    (bad / "rosters.json").write_text('[{"game_id": "zz", "team": "home", "jersey": 1, "player_name": "X"}]')
    assert run(capsys, "ingest", "--data-dir", bad, "--out", tmp_path)[0] == 2
    code, _, err = run(capsys, "run", "--data-dir", data_dir, "--out", tmp_path, "--endpoint", "http://127.0.0.1:9")
    assert code == 3 and "generate stage" in err


def test_empty_evaluation_is_nonzero(capsys, tmp_path, data_dir):
    (tmp_path / "none.jsonl").write_text('{"clip_id": "ghost", "ad_text": "x"}\n')
    code, out, _ = run(capsys, "evaluate", "--data-dir", data_dir, "--out", tmp_path, "--candidates", tmp_path / "none.jsonl")
    assert code == 2 and "no clips evaluated" in out
    assert json.loads((tmp_path / "report.json").read_text())["status"] == "no clips evaluated"


def test_segment(capsys, tmp_path):
    frames = [FrameFeature(i, float(i), 40.0, 60.0, 10.0 if i < 20 else 200.0) for i in range(36)]
    write_frames_csv(tmp_path / "f.csv", frames)
    code, out, _ = run(capsys, "segment", tmp_path / "f.csv", "--game-id", "g1", "--out", tmp_path)
    assert code == 0 and json.loads(out)["clips"] == 2
    assert run(capsys, "segment", tmp_path / "f.csv", "--game-id", "g1", "--min-scene", "50", "--out", tmp_path)[0] == 1


def test_corr(capsys, tmp_path):
    (tmp_path / "a.csv").write_text("clip_id,score\na,0.2\nb,0.4\nc,1.0\n")
    (tmp_path / "b.csv").write_text("clip_id,human\na,1\nb,2\nc,3\n")
    code, out, _ = run(capsys, "corr", tmp_path / "a.csv", tmp_path / "b.csv", "--column-b", "human")
    assert code == 0 and json.loads(out)["kendall"] == pytest.approx(1.0)


def test_mock_serve_subprocess(data_dir):
    proc = subprocess.Popen(
        [sys.executable, "-m", "argead.cli", "mock-serve", "--fixtures", str(data_dir / "candidates.jsonl"), "--port", "0"],
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline()
        assert line.startswith("serving fixture mock on ")
        url = line.split()[-1]
        r = httpx.post(url + "/v1/generate", json={"clip_id": "g1_c01", "prompt": "Describe."}, timeout=5)
        assert r.json()["ad_text"] == "Wayne Rooney shoots from the edge of the box."
    finally:
        proc.terminate()
        proc.wait(timeout=5)
