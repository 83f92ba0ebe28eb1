import json

import numpy as np
import pytest

import harkit as hk
from harkit.cli import main, read_features_csv, write_features_csv
from harkit.features import FEATURE_DIM


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = run("synth", "--out-dir", out, "--seed", "3")
    assert code == 0
    return out


@pytest.fixture(scope="module")
def features_dir(tmp_path_factory, synth_dir):
    out = tmp_path_factory.mktemp("features")
    code = run(
        "features", "--out-dir", out,
        "--stretch", synth_dir / "stretch.csv",
        "--accel", synth_dir / "accel.csv",
        "--labels", synth_dir / "labels.csv",
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory, features_dir):
    out = tmp_path_factory.mktemp("model")
    code = run(
        "train", "--out-dir", out, "--features", features_dir / "features.csv",
        "--epochs", 300, "--seed", "0",
    )
    assert code == 0
    return out


def test_synth_outputs(synth_dir):
    for name in ("stretch.csv", "accel.csv", "labels.csv", "events.csv", "stream.png", "run_log.jsonl"):
        assert (synth_dir / name).exists(), name
    header = (synth_dir / "stretch.csv").read_text().splitlines()[0]
    assert header == "t_ms,c_pf"


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", "--out-dir", a, "--seed", "11", "--no-figures") == 0
    assert run("synth", "--out-dir", b, "--seed", "11", "--no-figures") == 0
    for name in ("stretch.csv", "accel.csv", "labels.csv", "events.csv", "run_log.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_preprocess_outputs(tmp_path, synth_dir):
    out = tmp_path / "prep"
    assert run(
        "preprocess", "--out-dir", out,
        "--stretch", synth_dir / "stretch.csv", "--accel", synth_dir / "accel.csv",
    ) == 0
    norm = (out / "stretch_norm.csv").read_text().splitlines()
    assert norm[0] == "t_ms,s"
    values = np.array([float(line.split(",")[1]) for line in norm[1:]])
    assert values.min() == 0.0


def test_segment_subcommand(tmp_path, synth_dir):
    out = tmp_path / "seg"
    assert run(
        "segment", "--out-dir", out,
        "--stretch", synth_dir / "stretch.csv", "--accel", synth_dir / "accel.csv",
    ) == 0
    lines = (out / "segments.csv").read_text().strip().splitlines()
    assert lines[0] == "start_ms,end_ms,cause"
    rows = [line.split(",") for line in lines[1:]]
    assert all(r[2] in ("TrendRise", "MaxDuration", "StreamEnd") for r in rows)
    # tiling
    for r1, r2 in zip(rows, rows[1:]):
        assert r1[1] == r2[0]


def test_features_csv_shape(features_dir):
    rows = read_features_csv(features_dir / "features.csv")
    assert len(rows) > 20
    x, label = rows[0]
    assert x.shape == (FEATURE_DIM,)
    assert label is not None


def test_features_roundtrip(tmp_path, features_dir):
    rows = read_features_csv(features_dir / "features.csv")
    path = tmp_path / "again.csv"
    write_features_csv(path, rows, labeled=True)
    assert path.read_bytes() == (features_dir / "features.csv").read_bytes()


def test_train_outputs(model_dir):
    assert (model_dir / "model.harn").exists()
    report = (model_dir / "train_report.csv").read_text().splitlines()
    assert report[0].startswith("train_accuracy,")
    params = hk.load_model(model_dir / "model.harn")
    assert params.n_hidden == 4


def test_eval_outputs(tmp_path, features_dir, model_dir):
    out = tmp_path / "eval"
    assert run(
        "eval", "--out-dir", out,
        "--features", features_dir / "features.csv",
        "--model", model_dir / "model.harn",
    ) == 0
    assert (out / "confusion.csv").exists()
    assert (out / "confusion.png").exists()
    log = [json.loads(line) for line in (out / "run_log.jsonl").read_text().splitlines()]
    metric = next(e for e in log if e["event"] == "metric")
    assert 0.0 <= metric["overall_accuracy"] <= 1.0


def test_sweep_outputs(tmp_path, features_dir):
    out = tmp_path / "sweep"
    assert run(
        "sweep", "--out-dir", out, "--features", features_dir / "features.csv",
        "--n-hidden-max", 2, "--epochs", 60,
    ) == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    assert lines[0].startswith("n_hidden,")
    assert len(lines) == 3
    assert (out / "sweep.png").exists()


def test_rl_replay_outputs(tmp_path, features_dir, model_dir):
    out = tmp_path / "rl"
    assert run(
        "rl-replay", "--out-dir", out,
        "--features", features_dir / "features.csv",
        "--model", model_dir / "model.harn",
        "--episodes", 4, "--runs", 2, "--seed", "1",
    ) == 0
    lines = (out / "episodes.csv").read_text().strip().splitlines()
    assert lines[0] == "run,episode,accuracy"
    assert len(lines) == 1 + 2 * 4
    assert (out / "model_adapted.harn").exists()
    assert (out / "episodes.png").exists()


def test_pipeline_infer_and_rl(tmp_path, synth_dir, model_dir):
    out = tmp_path / "pipe"
    model = model_dir / "model.harn"
    before = model.read_bytes()
    assert run(
        "pipeline", "--out-dir", out, "--mode", "infer",
        "--stretch", synth_dir / "stretch.csv", "--accel", synth_dir / "accel.csv",
        "--model", model,
    ) == 0
    assert model.read_bytes() == before
    lines = (out / "recognized.csv").read_text().strip().splitlines()
    assert lines[0] == "activity,start_ms,end_ms"
    assert len(lines) > 10

    out_rl = tmp_path / "pipe_rl"
    assert run(
        "pipeline", "--out-dir", out_rl, "--mode", "rl",
        "--stretch", synth_dir / "stretch.csv", "--accel", synth_dir / "accel.csv",
        "--labels", synth_dir / "labels.csv", "--model", model,
    ) == 0
    assert (out_rl / "model_adapted.harn").exists()
    assert model.read_bytes() == before  # input model untouched


def test_config_file_fills_unset_options(tmp_path, synth_dir):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ngait_hz=1.3\nstretch_amp=0.8\n")
    out = tmp_path / "synthcfg"
    assert run("synth", "--out-dir", out, "--seed", "4", "--config", cfg, "--no-figures") == 0
    start = json.loads((out / "run_log.jsonl").read_text().splitlines()[0])
    assert start["args"]["profile"]["gait_hz"] == 1.3
    # explicit CLI flag wins over the config value
    out2 = tmp_path / "synthcfg2"
    assert run("synth", "--out-dir", out2, "--seed", "4", "--config", cfg,
               "--gait-hz", "1.1", "--no-figures") == 0
    start2 = json.loads((out2 / "run_log.jsonl").read_text().splitlines()[0])
    assert start2["args"]["profile"]["gait_hz"] == 1.1


def test_exit_code_2_on_input_error(tmp_path):
    missing = tmp_path / "nope.csv"
    out = tmp_path / "x"
    code = run("eval", "--out-dir", out, "--features", missing, "--model", missing)
    assert code == 2


def test_exit_code_2_on_malformed_csv(tmp_path, synth_dir):
    bad = tmp_path / "bad.csv"
    bad.write_text("t_ms,c_pf\n0,391\n10,zzz\n")
    out = tmp_path / "y"
    code = run("segment", "--out-dir", out,
               "--stretch", bad, "--accel", synth_dir / "accel.csv")
    assert code == 2


def test_exit_code_2_on_bad_config(tmp_path):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("no equals sign here\n")
    out = tmp_path / "z"
    assert run("synth", "--out-dir", out, "--config", cfg) == 2


def test_exit_code_3_on_numeric_failure(tmp_path, features_dir):
    out = tmp_path / "diverge"
    code = run("train", "--out-dir", out, "--features", features_dir / "features.csv",
               "--epochs", 50, "--learning-rate", "1e30")
    assert code == 3


def test_run_log_is_deterministic_jsonl(tmp_path, synth_dir):
    out = tmp_path / "log"
    assert run("segment", "--out-dir", out,
               "--stretch", synth_dir / "stretch.csv",
               "--accel", synth_dir / "accel.csv") == 0
    events = [json.loads(line) for line in (out / "run_log.jsonl").read_text().splitlines()]
    assert events[0]["event"] == "start"
    assert events[-1] == {"event": "done", "status": "ok"}
    assert any(e["event"] == "wrote" for e in events)


def test_pipeline_byte_identical_across_runs(tmp_path, synth_dir, model_dir):
    outs = []
    for name in ("p1", "p2"):
        out = tmp_path / name
        assert run(
            "pipeline", "--out-dir", out, "--mode", "infer", "--no-figures",
            "--stretch", synth_dir / "stretch.csv", "--accel", synth_dir / "accel.csv",
            "--model", model_dir / "model.harn",
        ) == 0
        outs.append(out)
    for fname in ("recognized.csv", "run_log.jsonl"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
