import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from timebridge.cli import main
from timebridge.config import RunConfig, RunConfigError, parse_overrides, parse_text
from timebridge.data import TimeSeriesFrame, save_csv

ROOT = Path(__file__).resolve().parents[1]
TOY_CFG = ROOT / "configs" / "toy.cfg"

RUN_CFG = """
input_len = 24
output_len = 6
patch_len = 6
downsampled_patches = 2
hidden_dim = 8
ff_dim = 8
n_heads = 2
epochs = 2
batch_size = 8
"""


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(0)
    vals = np.cumsum(rng.standard_normal((400, 3)), axis=0)
    path = tmp_path / "data.csv"
    save_csv(TimeSeriesFrame(["a", "b", "OT"], vals), path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(RUN_CFG + f"data_path = {path}\noutput_dir = {tmp_path / 'run'}\n")
    return cfg


# --- config parsing ------------------------------------------------------------------


def test_parse_text_and_overrides():
    d = parse_text("hidden_dim = 16  # comment\nintegrated_norm_enabled = false\n\n")
    assert d == {"hidden_dim": 16, "integrated_norm_enabled": False}
    assert parse_overrides(["--learning-rate", "0.01", "--epochs=3"]) == {"learning_rate": 0.01, "epochs": 3}


@pytest.mark.parametrize("text,key", [("hiden_dim = 3", "hiden_dim"), ("epochs = ten", "epochs"),
                                      ("block_order = sideways", "block_order")])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(RunConfigError, match=key):
        parse_text(text)


def test_config_snapshot_round_trip():
    cfg = RunConfig.load(TOY_CFG)
    again = RunConfig.load(None, parse_text(cfg.to_text()))
    assert again == cfg


# --- commands ----------------------------------------------------------------------


def test_missing_data_path_exits_2(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(RUN_CFG)
    code, out, err = _run(capsys, "train", "--config", str(cfg))
    assert code == 2 and out == "" and "data_path" in err


def test_unknown_override_exits_2(capsys, dataset):
    code, out, err = _run(capsys, "train", "--config", str(dataset), "--bogus-key", "1")
    assert code == 2 and out == "" and "bogus_key" in err


def test_train_is_deterministic_and_logs_epochs(capsys, dataset, tmp_path):
    c1, out1, _ = _run(capsys, "train", "--config", str(dataset), "--seed", "4", "--out", str(tmp_path / "r1"))
    c2, _, _ = _run(capsys, "train", "--config", str(dataset), "--seed", "4", "--out", str(tmp_path / "r2"))
    assert c1 == c2 == 0
    assert json.loads(out1)["epochs"] == 2
    a = (tmp_path / "r1" / "checkpoint.txt").read_bytes()
    assert a == (tmp_path / "r2" / "checkpoint.txt").read_bytes()
    log = (tmp_path / "r1" / "train_log.csv").read_text().strip().splitlines()
    assert log[0] == "epoch,train_loss,val_loss" and len(log) == 3
    for name in ("config_snapshot.cfg", "scaler.json"):
        assert (tmp_path / "r1" / name).exists()


def test_eval_untrained_checkpoint(capsys, dataset, tmp_path):
    from timebridge.config import RunConfig
    from timebridge.model import init_params, save_checkpoint

    mc = RunConfig.load(dataset).model_config(3)
    ck = tmp_path / "ck.txt"
    save_checkpoint(ck, mc, init_params(mc, 0))
    code, out, _ = _run(capsys, "eval", "--config", str(dataset), "--checkpoint", str(ck))
    assert code == 0
    doc = json.loads(out)
    for unit in ("standardized", "raw"):
        assert set(doc[unit]) == {"mse", "mae", "mape", "rmse", "n_samples"}
        assert all(np.isfinite(v) for v in doc[unit].values())
    # test split is 80 rows -> 80 - 24 - 6 + 1 windows, none dropped
    assert doc["standardized"]["n_samples"] == 51


def test_eval_channel_mismatch(capsys, dataset, tmp_path):
    from timebridge.model import init_params, save_checkpoint

    mc = RunConfig.load(dataset).model_config(2)
    ck = tmp_path / "ck.txt"
    save_checkpoint(ck, mc, init_params(mc, 0))
    code, out, err = _run(capsys, "eval", "--config", str(dataset), "--checkpoint", str(ck))
    assert code == 2 and out == "" and "channels" in err


def test_prop1_command(capsys):
    code, out, _ = _run(capsys, "prop1", "--S", "8", "--t", "100", "--i", "0", "--j", "16", "--trials", "50000")
    doc = json.loads(out)
    assert code == 0 and doc["rel_err"] < 0.05


def test_adf_calibration_command(capsys):
    code, out, _ = _run(capsys, "adf", "--kind", "random_walk", "--T", "10000", "--reps", "100", "--seed", "0")
    assert code == 0
    assert -1.88 <= json.loads(out)["mean_statistic"] <= -1.18


def test_adf_and_eg_on_csv(capsys, tmp_path):
    rng = np.random.default_rng(1)
    y = np.cumsum(rng.standard_normal(600))
    x = 2 * y + 0.5 * rng.standard_normal(600)
    path = tmp_path / "p.csv"
    save_csv(TimeSeriesFrame(["x", "y"], np.column_stack([x, y])), path)
    code, out, _ = _run(capsys, "adf", "--csv", str(path), "--column", "y")
    assert code == 0 and json.loads(out)["channels"]["y"]["verdict"] == "unit_root"
    code, out, _ = _run(capsys, "eg", "--csv", str(path), "--x", "x", "--y", "y")
    doc = json.loads(out)
    assert code == 0 and doc["cointegrated"] and abs(doc["beta"] - 2) < 0.05
    code, out, _ = _run(capsys, "eg", "--csv", str(path), "--pairs")
    assert json.loads(out)["cointegrated_pairs"] == 2


def test_synth_requires_out(capsys, tmp_path):
    code, _, err = _run(capsys, "synth", "--kind", "random_walk")
    assert code == 2 and "--out" in err
    code, _, _ = _run(capsys, "synth", "--kind", "random_walk", "--C", "2", "--out", str(tmp_path / "rw.csv"))
    assert code == 0 and (tmp_path / "rw.csv").exists()


def test_gradcheck_command(capsys):
    code, out, _ = _run(capsys, "gradcheck", "--config", str(TOY_CFG))
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["max_rel_err"] < 1e-4


def test_backtest_command(capsys, tmp_path):
    rng = np.random.default_rng(2)
    real = rng.normal(0, 0.01, (30, 5))
    names = [f"s{i}" for i in range(5)]
    save_csv(TimeSeriesFrame(names, real), tmp_path / "real.csv")
    save_csv(TimeSeriesFrame(names, real + rng.normal(0, 0.01, real.shape)), tmp_path / "pred.csv")
    out_dir = tmp_path / "bt"
    code, out, _ = _run(capsys, "backtest", "--pred", str(tmp_path / "pred.csv"), "--real", str(tmp_path / "real.csv"),
                        "--top-k", "2", "--out", str(out_dir))
    assert code == 0
    doc = json.loads(out)
    assert json.loads((out_dir / "report.json").read_text()) == doc
    assert len((out_dir / "equity_curve.csv").read_text().strip().splitlines()) == 31


def test_bad_csv_exits_2(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,OT\n1,x\n")
    code, out, err = _run(capsys, "adf", "--csv", str(p))
    assert code == 2 and out == "" and "row 2, column 'OT'" in err


def test_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "timebridge.cli", "prop1", "--trials", "2000", "--seed", "3"],
                          capture_output=True, text=True, check=True)
    again = subprocess.run([sys.executable, "-m", "timebridge.cli", "prop1", "--trials", "2000", "--seed", "3"],
                           capture_output=True, text=True, check=True)
    assert proc.stdout == again.stdout
    assert json.loads(proc.stdout)["closed_form"] == 836.0
