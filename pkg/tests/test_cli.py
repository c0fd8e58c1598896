import json
from pathlib import Path

import numpy as np
import pytest

from tlc.cli import main

MICRO_TOML = """
profile = "toy"
seed = 4

[corpus]
count = 20
t_max = 16

[vqvae]
codebook_size = 8
code_dim = 8
width = 24
epochs = 8
batch_size = 4
lr = 1e-3
lr_final = 5e-4
reset_warmup_steps = 4

[mtt]
stage1_width = 32
stage2_width = 16
heads = 2
epochs = 6
batch_size = 4
lr = 1e-3
lr_final = 5e-4

[eval]
control_joints = ["root"]
mask_rates = [0.0, 0.5]
tolerances = [1e-3]
num_eval_samples = 2
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "micro.toml"
    config.write_text(MICRO_TOML)
    data = root / "data"
    model = root / "model"
    assert main(["gen-data", "--config", str(config), "--out", str(data)]) == 0
    assert main([
        "train-vqvae", "--config", str(config), "--data", str(data),
        "--out", str(model), "--log-every", "0",
    ]) == 0
    assert main([
        "train-mtt", "--config", str(config), "--data", str(data),
        "--out", str(model), "--log-every", "0",
    ]) == 0
    return root, config, data, model


def test_gen_data_outputs(workspace):
    root, config, data, model = workspace
    lines = (data / "corpus.jsonl").read_text().strip().splitlines()
    assert len(lines) == 20
    first = json.loads(lines[0])
    assert first["motion"]["feature_dim"] == 137
    stats = json.loads((data / "stats.json").read_text())
    assert len(stats["mean"]) == 137


def test_training_artifacts(workspace):
    root, config, data, model = workspace
    assert (model / "codec" / "manifest.json").exists()
    assert (model / "codec" / "weights.bin").exists()
    assert (model / "mtt" / "manifest.json").exists()
    assert (model / "stats.json").exists()
    assert (model / "config.json").exists()
    history = json.loads((model / "vqvae_history.json").read_text())
    assert len(history) == 8


def test_generate_command(workspace, tmp_path):
    root, config, data, model = workspace
    traj = {
        "length": 16,
        "controls": [
            {
                "joint_group": "root",
                "waypoints": [
                    {"frame": 0, "position": [0.0, 0.9, 0.0]},
                    {"frame": 8, "position": [0.3, 0.9, 0.0]},
                ],
            }
        ],
    }
    traj_file = tmp_path / "traj.json"
    traj_file.write_text(json.dumps(traj))
    out_file = tmp_path / "out.json"
    rc = main([
        "generate", "--model-dir", str(model), "--text", "a person walks forward slowly",
        "--traj", str(traj_file), "--tol", "1e-3", "--samples", "2",
        "--seed", "1", "--out", str(out_file),
    ])
    assert rc == 0
    doc = json.loads(out_file.read_text())
    assert len(doc["motions"]) == 2
    assert doc["motions"][0]["frames"] == 16
    assert doc["control_errors"]["avg_err_cm"] >= 0


def test_generate_uses_env_model_dir(workspace, tmp_path, monkeypatch):
    root, config, data, model = workspace
    monkeypatch.setenv("TLC_MODEL_DIR", str(model))
    out_file = tmp_path / "out.json"
    rc = main([
        "generate", "--text", "a person squats down and stands back up",
        "--length", "16", "--samples", "1", "--out", str(out_file),
    ])
    assert rc == 0
    doc = json.loads(out_file.read_text())
    assert doc["control_errors"] is None


def test_generate_without_model_dir_fails(workspace, tmp_path, monkeypatch):
    monkeypatch.delenv("TLC_MODEL_DIR", raising=False)
    rc = main([
        "generate", "--text", "walk", "--length", "16",
        "--out", str(tmp_path / "x.json"),
    ])
    assert rc == 2


def test_eval_command(workspace, tmp_path):
    root, config, data, model = workspace
    out = tmp_path / "eval"
    rc = main([
        "eval", "--config", str(config), "--data", str(data),
        "--model-dir", str(model), "--out", str(out),
    ])
    assert rc == 0
    rows = json.loads((out / "results.json").read_text())
    assert len(rows) == 2  # one selection x two mask rates x one tolerance
    assert (out / "results.csv").exists()


def test_ablate_command(workspace, tmp_path):
    root, config, data, model = workspace
    out = tmp_path / "ablation"
    rc = main([
        "ablate", "--config", str(config), "--data", str(data),
        "--model-dir", str(model), "--out", str(out),
    ])
    assert rc == 0
    summary = json.loads((out / "ablation_summary.json").read_text())
    assert summary["part_group_independent"] is True
    assert summary["unsplit_group_independent"] is False
    assert summary["ik_comparison"]["ik_unspecified_frames_bit_identical"] is True
    rows = json.loads((out / "ablation.json").read_text())
    assert {r["variant"] for r in rows} == {"part", "unsplit"}


def test_config_file_round_trip(tmp_path):
    from tlc.config import load_config

    cfg = load_config(None, profile="toy")
    assert cfg.corpus.t_max == 64
    json_cfg = tmp_path / "cfg.json"
    json_cfg.write_text(json.dumps({"profile": "toy", "corpus": {"t_max": 32, "count": 5}}))
    cfg2 = load_config(json_cfg)
    assert cfg2.corpus.t_max == 32
    assert cfg2.corpus.count == 5
    with pytest.raises(Exception):
        load_config(None, profile="nope")
