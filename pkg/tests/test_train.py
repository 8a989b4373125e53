import datetime as dt

import numpy as np
import pytest

from grnn.data import NormalizationParams, WindowedDataset
from grnn.metrics import evaluate
from grnn.network import LayerSpec, NetworkSpec
from grnn.numerics import FLOAT
from grnn.train import (
    RunArchive,
    TrainConfig,
    TrainingDiverged,
    load_archive,
    run_experiment,
    save_archive,
    train,
)

SINE_SPEC = NetworkSpec(layers=(LayerSpec("lstm", 16),), input_dim=1)


def zero_dataset(n=12, lookback=3):
    """All-zero inputs and targets: the loss is exactly constant."""
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n)]
    return WindowedDataset(
        train_x=np.zeros((n, lookback, 1), dtype=FLOAT),
        train_y=np.zeros(n, dtype=FLOAT),
        test_x=np.zeros((4, lookback, 1), dtype=FLOAT),
        test_y=np.zeros(4, dtype=FLOAT),
        norm=NormalizationParams({"X": (0.0, 1.0)}),
        feature_order=["X"], target_name="X", lookback=lookback,
        train_dates=dates, test_dates=dates[:4],
    )


def test_constant_loss_stops_after_patience_plus_one():
    spec = NetworkSpec(layers=(LayerSpec("lstm", 2),), input_dim=1)
    cfg = TrainConfig(batch_size=4, max_epochs=100, patience=5, seed=0)
    result = train(spec, zero_dataset(), cfg)
    assert result.stopped_epoch == 6          # epoch 1 sets best, 5 misses follow
    assert len(result.epoch_losses) == 6
    assert result.epoch_losses == [0.0] * 6


def test_decreasing_loss_runs_to_max_epochs(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=12, patience=5,
                      learning_rate=3e-3, seed=1)
    result = train(SINE_SPEC, sine_dataset, cfg)
    assert result.stopped_epoch == 12
    assert all(a > b for a, b in zip(result.epoch_losses, result.epoch_losses[1:]))


def test_train_is_deterministic(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=8, patience=5,
                      learning_rate=3e-3, seed=7)
    r1 = train(SINE_SPEC, sine_dataset, cfg)
    r2 = train(SINE_SPEC, sine_dataset, cfg)
    assert r1.epoch_losses == r2.epoch_losses
    for (n1, a1), (n2, a2) in zip(r1.best_params.tensors(), r2.best_params.tensors()):
        assert n1 == n2
        assert np.array_equal(a1, a2)


def test_sine_smoke_reaches_low_loss(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=500, patience=5,
                      learning_rate=3e-3, optimizer="nadam", seed=42)
    result = train(SINE_SPEC, sine_dataset, cfg)
    assert result.best_loss < 1e-3
    report = evaluate(SINE_SPEC, result.best_params, sine_dataset, split="test")
    assert report.r2 > 0.99


def test_early_stop_invariant(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=60, patience=3,
                      learning_rate=0.05, optimizer="sgd", seed=3)
    result = train(SINE_SPEC, sine_dataset, cfg)
    assert result.best_loss == min(result.epoch_losses)
    gap = result.stopped_epoch - (int(np.argmin(result.epoch_losses)) + 1)
    assert 0 <= gap <= cfg.patience


def test_batch_one_and_full_batch_both_converge(sine_dataset):
    for batch in (1, sine_dataset.train_x.shape[0]):
        cfg = TrainConfig(batch_size=batch, max_epochs=40, patience=40,
                          learning_rate=3e-3, seed=5)
        result = train(SINE_SPEC, sine_dataset, cfg)
        assert result.best_loss < 0.02, f"batch={batch}"


def test_divergence_is_reported(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=50, patience=50,
                      learning_rate=1e12, optimizer="sgd", seed=2)
    with pytest.raises(TrainingDiverged):
        train(SINE_SPEC, sine_dataset, cfg)


def test_run_experiment_determinism_and_retention(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=120, patience=5,
                      learning_rate=3e-3, seed=42)
    arc1 = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2,
                          architecture="lstm1")
    arc2 = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2,
                          architecture="lstm1")
    assert [r.to_record() for r in arc1.runs] == [r.to_record() for r in arc2.runs]
    assert [r.seed for r in arc1.runs] == [42, 43]
    assert all(r.retained for r in arc1.runs)          # sine runs clear 0.90 easily
    best = arc1.best()
    assert best.report.r2 == max(r.report.r2 for r in arc1.runs)


def test_run_experiment_zero_retained_is_not_a_crash(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=1, patience=5,
                      learning_rate=1e-5, seed=0)
    archive = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2,
                             architecture="lstm1", r2_bar=0.999999)
    assert archive.best() is None
    assert archive.retained == []
    assert len(archive.runs) == 2


def test_run_experiment_records_failed_runs(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=30, patience=30,
                      learning_rate=1e12, optimizer="sgd", seed=9)
    archive = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2)
    assert all(r.status == "failed" for r in archive.runs)
    assert all(r.report is None for r in archive.runs)
    assert archive.best() is None


def test_archive_roundtrip_and_byte_determinism(tmp_path, sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=60, patience=5,
                      learning_rate=3e-3, seed=11)
    archive = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2,
                             architecture="lstm1")
    p1, p2 = tmp_path / "a1.jsonl", tmp_path / "a2.jsonl"
    save_archive(p1, archive)
    save_archive(p2, run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2,
                                    architecture="lstm1"))
    assert p1.read_bytes() == p2.read_bytes()
    back = load_archive(p1)
    assert back.architecture == "lstm1"
    assert [r.to_record() for r in back.runs] == [r.to_record() for r in archive.runs]


def test_parallel_workers_match_sequential(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=25, patience=5,
                      learning_rate=3e-3, seed=21)
    seq = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2, architecture="x")
    par = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2, architecture="x",
                         workers=2)
    assert [r.to_record() for r in seq.runs] == [r.to_record() for r in par.runs]


def test_metric_samples_pull_retained_only(sine_dataset):
    cfg = TrainConfig(batch_size=16, max_epochs=80, patience=5,
                      learning_rate=3e-3, seed=31)
    archive = run_experiment(SINE_SPEC, sine_dataset, cfg, repeats=2,
                             architecture="lstm1")
    samples = archive.metric_samples("r2")
    assert samples.size == len(archive.retained)
    assert np.all(samples > 0.90)
