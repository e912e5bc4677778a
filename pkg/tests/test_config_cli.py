import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from clbr.cli import main
from clbr.config import PipelineConfig, TrainConfig, config_from_dict, config_to_dict, load_config
from clbr.errors import ConfigError
from clbr.io import sha256_file


def write(path, text):
    path.write_text(text)
    return path


def test_empty_config_gives_defaults(tmp_path):
    cfg = load_config(write(tmp_path / "c.toml", ""))
    assert cfg == PipelineConfig().replace(out=cfg.out)
    t = cfg.train
    assert (t.embedding_dim, t.minibatch_size, t.layers) == (64, 2048, 2)
    assert cfg.loss.tau == 1.0
    assert (cfg.augment.alpha_plus, cfg.augment.alpha_minus, cfg.augment.num_views) == (0.8, 1.2, 4)


def test_ratio_out_of_range(tmp_path):
    with pytest.raises(ConfigError, match="r_ub"):
        load_config(write(tmp_path / "c.toml", "[augment]\nr_ub = 1.5\n"))


def test_tau_override(tmp_path):
    assert load_config(write(tmp_path / "c.toml", "[loss]\ntau = 2\n")).loss.tau == 2.0


@pytest.mark.parametrize("text,key", [
    ("bogus = 1\n", "bogus"),
    ("[train]\nlr = 0.1\n", "train.lr"),
    ("[train]\nseed = 3\n", "train.seed"),
    ("[loss]\nomega = 1\n", "loss.omega"),
])
def test_unknown_keys_are_named(tmp_path, text, key):
    with pytest.raises(ConfigError, match=f"unknown config key: {key}"):
        load_config(write(tmp_path / "c.toml", text))


def test_type_errors_are_named(tmp_path):
    with pytest.raises(ConfigError, match="train.epochs"):
        load_config(write(tmp_path / "c.toml", "[train]\nepochs = \"ten\"\n"))
    with pytest.raises(ConfigError, match="malformed"):
        load_config(write(tmp_path / "c.toml", "[train\n"))
    with pytest.raises(ConfigError, match="data.ub"):
        load_config(write(tmp_path / "c.toml", "[data]\nub = \"missing.tsv\"\n"))


def test_master_seed_reaches_stages():
    cfg = config_from_dict({"seed": 9})
    assert cfg.train.seed == 9 and cfg.split.seed == 9


def test_snapshot_round_trips(tmp_path, fixture_dir):
    import tomli_w

    cfg = load_config(fixture_dir / "config.toml")
    snap = config_to_dict(cfg)
    p = tmp_path / "snap.toml"
    p.write_bytes(tomli_w.dumps(snap).encode())
    assert load_config(p) == cfg


def test_train_config_defaults():
    t = TrainConfig()
    assert (t.learning_rate, t.pretrain_epochs, t.early_stop_patience) == (1e-3, 100, None)


@pytest.fixture
def fixture_copy(tmp_path, fixture_dir):
    d = tmp_path / "fx"
    shutil.copytree(fixture_dir, d)
    return d / "config.toml"


def test_eval_before_train(tmp_path, fixture_copy, capsys):
    rc = main(["eval", "--config", str(fixture_copy), "--out", str(tmp_path / "o")])
    assert rc == 5
    assert "requires train stage output" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    rc = main(["pretrain", "--config", str(write(tmp_path / "c.toml", "[augment]\nr_ub = 1.5\n"))])
    assert rc == 2


def test_data_error_exit_code(tmp_path, fixture_copy):
    (fixture_copy.parent / "ub.tsv").write_text("0\tx\n")
    assert main(["pretrain", "--config", str(fixture_copy), "--out", str(tmp_path / "o")]) == 3


def run_all(config, out):
    assert main(["all", "--config", str(config), "--out", str(out)]) == 0
    return out


def test_full_pipeline_on_fixture(tmp_path, fixture_copy, capsys):
    out = run_all(fixture_copy, tmp_path / "o")
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 7 and 0.0 <= summary["metrics"]["recall@20"] <= 1.0
    for rel in ("split/ub_train.tsv", "pretrain/selection.tsv", "views/view_3.tsv", "train/checkpoint.tsv",
                "train/config.toml", "train/log.csv", "eval/metrics.csv", "eval/summary.json"):
        assert (out / rel).is_file(), rel
    manifest = json.loads((out / "manifest.json").read_text())
    for stage in ("pretrain", "augment", "train", "eval"):
        for rel, digest in manifest["stages"][stage]["outputs"].items():
            assert sha256_file(out / rel) == digest
    assert load_config(out / "train" / "config.toml").train == load_config(fixture_copy).train
    log = (out / "train" / "log.csv").read_text().splitlines()
    assert log[0] == "epoch,view_index,l_task,l_u,l_b,total,lr" and len(log) == 41

    assert main(["export-emb", "--config", str(fixture_copy), "--out", str(out)]) == 0
    lines = (out / "export" / "embeddings.tsv").read_text().splitlines()
    assert len(lines) == 30 and lines[0].startswith("user\t0\t") and len(lines[0].split("\t")) == 18


def test_same_seed_gives_identical_metrics_csv(tmp_path, fixture_copy):
    a = run_all(fixture_copy, tmp_path / "a")
    b = run_all(fixture_copy, tmp_path / "b")
    assert (a / "eval/metrics.csv").read_bytes() == (b / "eval/metrics.csv").read_bytes()
    assert (a / "views/view_0.tsv").read_bytes() == (b / "views/view_0.tsv").read_bytes()


def test_stages_resume_individually(tmp_path, fixture_copy):
    out = tmp_path / "o"
    for stage in ("pretrain", "augment", "train", "eval"):
        assert main([stage, "--config", str(fixture_copy), "--out", str(out)]) == 0
    whole = run_all(fixture_copy, tmp_path / "w")
    assert (out / "eval/metrics.csv").read_bytes() == (whole / "eval/metrics.csv").read_bytes()


def test_sample_complexity_stage(tmp_path, capsys):
    cfg = write(tmp_path / "c.toml", "[theory]\nepsilon = 0.1\ndelta = 0.05\neta = 0.1\nhypothesis_count = 1e6\n")
    assert main(["sample-complexity", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert json.loads(capsys.readouterr().out)["samples"] == 5471
    bad = write(tmp_path / "bad.toml", "[theory]\neta = 0.5\n")
    assert main(["sample-complexity", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_console_script(tmp_path):
    exe = shutil.which("clbr")
    cmd = [exe] if exe else [sys.executable, "-m", "clbr.cli"]
    res = subprocess.run(cmd + ["sample-complexity", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["samples"] == 5471
