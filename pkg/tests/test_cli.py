import json
import os

import numpy as np
import pytest

from grnn.cli import main
from grnn.config import load_config, parse_arch_label
from grnn.hpo import load_history
from grnn.network import load_model
from grnn.synthetic import write_bundle, write_sine


def write_sine_config(tmp_path, **overrides):
    data_dir = tmp_path / "data"
    data_dir.mkdir(exist_ok=True)
    csv_path, column = write_sine(data_dir / "sine.csv", n_points=260)
    cfg = {
        "data": {"date_column": "Date", "target": "SINE", "indicators": "",
                 "lookback": 8, "split": 0.80, "fit_on": "train_only"},
        "sources": {"SINE": f"{csv_path}:{column}"},
        "train": {"optimizer": "nadam", "activation": "tanh", "max_epochs": 120,
                  "patience": 5, "learning_rate": 0.003, "batch_size": 16,
                  "repeats": 2, "seed": 42, "r2_bar": 0.90},
        "hpo": {"n_trials": 6, "n_startup": 2, "max_epochs": 4, "seed": 5,
                "train_seed": 5, "units_low": 4, "units_high": 16,
                "lr_low": 1e-3, "lr_high": 1e-2, "batch_low": 8, "batch_high": 32},
        "output": {"dir": str(tmp_path / "out")},
        "architectures": {"roster": "lstm1,gru1"},
        "arch.lstm1": {"units": 16, "learning_rate": 0.003, "batch_size": 16},
        "arch.gru1": {"units": 12, "learning_rate": 0.003, "batch_size": 16},
    }
    for key, section in overrides.items():
        cfg.setdefault(key, {}).update(section)
    path = tmp_path / "config.ini"
    with open(path, "w", encoding="utf-8") as fh:
        for section, values in cfg.items():
            fh.write(f"[{section}]\n")
            for k, v in values.items():
                fh.write(f"{k} = {v}\n")
            fh.write("\n")
    return path


def test_parse_arch_labels():
    assert parse_arch_label("lstm1") == ("lstm",)
    assert parse_arch_label("gru3") == ("gru", "gru", "gru")
    assert parse_arch_label("gru-lstm1") == ("gru", "lstm")
    assert parse_arch_label("gru-lstm2") == ("gru", "lstm", "gru", "lstm")
    assert parse_arch_label("lstm-gru1") == ("lstm", "gru")
    with pytest.raises(Exception):
        parse_arch_label("transformer1")


def test_config_loading_and_overrides(tmp_path):
    path = write_sine_config(tmp_path)
    cfg = load_config(path)
    assert cfg.target == "SINE"
    assert cfg.indicators == ()
    assert cfg.architectures["lstm1"].units == (16,)
    cfg2 = load_config(path, overrides=["train.seed=99", "data.lookback=4"])
    assert cfg2.train.seed == 99 and cfg2.lookback == 4


def test_prepare_is_deterministic_and_reports_counts(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    out1 = capsys.readouterr().out
    assert "260 rows (208 train / 52 test)" in out1
    prepared = (tmp_path / "out" / "prepared.csv").read_bytes()
    sidecar = (tmp_path / "out" / "norm_params.json").read_bytes()

    assert main(["prepare", "--config", str(path)]) == 0
    assert (tmp_path / "out" / "prepared.csv").read_bytes() == prepared
    assert (tmp_path / "out" / "norm_params.json").read_bytes() == sidecar


def test_prepare_missing_file_fails_with_name(tmp_path, capsys):
    path = write_sine_config(tmp_path, sources={"SINE": "no/such/file.csv:Value"})
    assert main(["prepare", "--config", str(path)]) == 1
    assert "file.csv" in capsys.readouterr().err


def test_market_prepare_trims_to_published_row_count(tmp_path, capsys):
    manifest = write_bundle(tmp_path / "mkt", seed=0)
    lines = ["[data]", "target = NIFTY", "lookback = 10", "split = 0.80",
             "fit_on = full", "", "[sources]"]
    for name, (p, col) in manifest.items():
        lines.append(f"{name} = {p}:{col}")
    lines += ["", "[output]", f"dir = {tmp_path / 'out'}",
              "", "[architectures]", "roster = lstm1",
              "", "[arch.lstm1]", "units = 8"]
    cfg = tmp_path / "m.ini"
    cfg.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["prepare", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "prepared 3649 rows (2919 train / 730 test)" in out
    assert "NIFTY" in out and "RSI" in out


def test_full_pipeline_train_evaluate_compare_report(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0

    assert main(["train", "--config", str(path), "--arch", "lstm1",
                 "--repeats", "2"]) == 0
    out = capsys.readouterr().out
    assert "LSTM" in out
    archive_path = tmp_path / "out" / "train" / "lstm1" / "archive.jsonl"
    ckpt = tmp_path / "out" / "train" / "lstm1" / "best.grnn"
    assert archive_path.exists() and ckpt.exists()

    spec, params, extra = load_model(ckpt)
    assert extra["architecture"] == "lstm1"
    assert extra["lookback"] == 8

    assert main(["evaluate", "--config", str(path), "--checkpoint", str(ckpt)]) == 0
    eval_out = capsys.readouterr().out
    assert "LSTM" in eval_out
    eval_json = json.loads((tmp_path / "out" / "eval" / "lstm1.json").read_text())
    assert eval_json["r2"] > 0.99

    assert main(["train", "--config", str(path), "--arch", "gru1",
                 "--repeats", "2"]) == 0
    capsys.readouterr()

    assert main(["compare", "--config", str(path)]) == 0
    cmp_out = capsys.readouterr().out
    assert "(lstm1, gru1)" in cmp_out
    assert "t-statistic" in cmp_out
    assert (tmp_path / "out" / "compare" / "comparison.jsonl").exists()

    assert main(["report", "--config", str(path), "--arch", "lstm1"]) == 0
    capsys.readouterr()
    scatter = (tmp_path / "out" / "report" / "lstm1_scatter.csv").read_text().splitlines()
    n_test = 52 - 8
    assert len(scatter) == n_test + 1
    assert scatter[0] == "date,actual,predicted"
    metrics = (tmp_path / "out" / "report" / "lstm1_metrics.csv").read_text().splitlines()
    archive_lines = [json.loads(l) for l in archive_path.read_text().splitlines()[1:]]
    retained = sum(1 for rec in archive_lines if rec["retained"])
    assert len(metrics) == 3 * retained + 1


def test_train_rerun_is_byte_identical(tmp_path):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    assert main(["train", "--config", str(path), "--arch", "lstm1",
                 "--repeats", "2"]) == 0
    archive_path = tmp_path / "out" / "train" / "lstm1" / "archive.jsonl"
    ckpt_path = tmp_path / "out" / "train" / "lstm1" / "best.grnn"
    first = (archive_path.read_bytes(), ckpt_path.read_bytes())
    assert main(["train", "--config", str(path), "--arch", "lstm1",
                 "--repeats", "2"]) == 0
    assert (archive_path.read_bytes(), ckpt_path.read_bytes()) == first


def test_train_no_qualifying_run_exits_nonzero(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    rc = main(["train", "--config", str(path), "--arch", "lstm1",
               "--repeats", "1", "--set", "train.max_epochs=1",
               "--set", "train.learning_rate=1e-6"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "no qualifying run" in err
    assert "best achieved R2" in err


def test_hpo_writes_log_and_best_then_resumes(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0

    assert main(["hpo", "--config", str(path), "--arch", "lstm1",
                 "--set", "hpo.n_trials=4", "--set", "hpo.n_startup=2"]) == 0
    capsys.readouterr()
    log_path = tmp_path / "out" / "hpo" / "lstm1" / "trials.jsonl"
    assert len(load_history(log_path)) == 4

    # resume to 6 trials: exactly two more appended, earlier ones unchanged
    before = load_history(log_path)
    assert main(["hpo", "--config", str(path), "--arch", "lstm1"]) == 0
    capsys.readouterr()
    after = load_history(log_path)
    assert len(after) == 6
    assert [t.to_record() for t in after[:4]] == [t.to_record() for t in before]

    best = json.loads((tmp_path / "out" / "hpo" / "lstm1" / "best.json").read_text())
    assert 4 <= best["units"][0] <= 16
    assert 1e-3 <= best["learning_rate"] <= 1e-2
    assert 8 <= best["batch_size"] <= 32

    # a hybrid architecture samples one units value per layer
    assert main(["hpo", "--config", str(path), "--arch", "gru1",
                 "--set", "architectures.roster=lstm1,gru1,gru-lstm1",
                 "--set", "hpo.n_trials=3", "--set", "hpo.n_startup=2"]) == 0
    capsys.readouterr()
    assert main(["hpo", "--config", str(path), "--arch", "gru-lstm1",
                 "--set", "architectures.roster=lstm1,gru1,gru-lstm1",
                 "--set", "hpo.n_trials=3", "--set", "hpo.n_startup=2"]) == 0
    capsys.readouterr()
    hybrid_best = json.loads(
        (tmp_path / "out" / "hpo" / "gru-lstm1" / "best.json").read_text())
    assert len(hybrid_best["units"]) == 2


def test_train_can_consume_hpo_best(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    assert main(["hpo", "--config", str(path), "--arch", "lstm1",
                 "--set", "hpo.n_trials=3", "--set", "hpo.n_startup=2"]) == 0
    best_path = tmp_path / "out" / "hpo" / "lstm1" / "best.json"
    assert main(["train", "--config", str(path), "--arch", "lstm1",
                 "--repeats", "1", "--hyperparams", str(best_path)]) == 0
    capsys.readouterr()


def test_seed_override_changes_archive(tmp_path):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    assert main(["train", "--config", str(path), "--arch", "lstm1",
                 "--repeats", "1"]) == 0
    archive_path = tmp_path / "out" / "train" / "lstm1" / "archive.jsonl"
    rec_default = json.loads(archive_path.read_text().splitlines()[1])
    assert main(["train", "--config", str(path), "--arch", "lstm1",
                 "--repeats", "1", "--seed", "777"]) == 0
    rec_seeded = json.loads(archive_path.read_text().splitlines()[1])
    assert rec_default["seed"] == 42
    assert rec_seeded["seed"] == 777


def test_evaluate_rejects_corrupt_checkpoint(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    bad = tmp_path / "bad.grnn"
    bad.write_bytes(b"garbage\x00\x01\n more garbage")
    assert main(["evaluate", "--config", str(path), "--checkpoint", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_compare_requires_two_archives(tmp_path, capsys):
    path = write_sine_config(tmp_path)
    assert main(["prepare", "--config", str(path)]) == 0
    assert main(["compare", "--config", str(path)]) == 1
    assert ">= 2 archives" in capsys.readouterr().err


def test_env_var_caps_parallel_workers(monkeypatch):
    from grnn.cli import _workers

    assert _workers(parallel=False, repeats=48) == 1
    monkeypatch.setenv("GRNN_THREADS", "3")
    assert _workers(parallel=True, repeats=48) == 3
    assert _workers(parallel=True, repeats=2) == 2
    monkeypatch.setenv("GRNN_THREADS", "1")
    assert _workers(parallel=True, repeats=48) == 1
