"""Training loop and the repeated-run experiment protocol.

One `train` call is fully deterministic from its seed: weights are
initialized from the seed's stream, and per-epoch shuffling draws from a
second stream of the same seed.  The monitored quantity is the training
MSE; early stopping fires when the best loss so far has not improved by
at least 1e-12 for `patience` consecutive epochs (the test split never
influences stopping).  The weights with the lowest monitored loss are the
returned model.

`run_experiment` trains with seeds seed, seed+1, ... and evaluates each
run on the held-out test split, retaining runs whose test R^2 clears the
configured bar (0.90 by default).  Every run -- retained, discarded, or
diverged -- stays in the archive for statistical testing.  Runs are
independent, so they may execute in worker processes; results are always
collected in seed order, making the archive identical however it was
scheduled.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import WindowedDataset
from .metrics import EvalReport, evaluate
from .network import NetworkParams, NetworkSpec, backward, forward_batch, mse_loss
from .numerics import FLOAT, Rng
from .optim import NonFiniteGradient, OptimizerState, apply, clip_gradients

IMPROVEMENT_EPS = 1e-12
R2_RETENTION_BAR = 0.90


class TrainingDiverged(RuntimeError):
    """Training loss became non-finite; the run is recorded as failed."""


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 5
    learning_rate: float = 0.001
    optimizer: str = "nadam"
    seed: int = 0
    shuffle: bool = True
    clip_norm: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class TrainResult:
    final_params: NetworkParams
    best_params: NetworkParams
    epoch_losses: list
    stopped_epoch: int
    seed: int

    @property
    def best_loss(self) -> float:
        return min(self.epoch_losses)


def train(spec: NetworkSpec, data: WindowedDataset, cfg: TrainConfig) -> TrainResult:
    """Fit one network; see the module docstring for the protocol."""
    xs, ys = data.train_x, data.train_y
    n = xs.shape[0]
    if n == 0:
        raise ValueError("training split is empty")
    if xs.shape[2] != spec.input_dim:
        raise ValueError(f"dataset features {xs.shape[2]} != spec input_dim {spec.input_dim}")

    seed_rng = Rng(cfg.seed)
    params = NetworkParams.init(spec, seed_rng.child(0))
    shuffle_rng = seed_rng.child(1)
    opt = OptimizerState.create(cfg.optimizer, cfg.learning_rate)

    best_loss = np.inf
    best_params = params.copy()
    epoch_losses: list[float] = []
    epochs_since_improvement = 0
    stopped_epoch = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n) if cfg.shuffle else np.arange(n)
        sq_err_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            bx, by = xs[idx], ys[idx]
            # overflow surfaces through the explicit finite-loss check
            with np.errstate(over="ignore", invalid="ignore"):
                preds, tape = forward_batch(spec, params, bx)
                err = preds[:, 0] - by
                batch_loss = float(np.mean(err * err))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch} (seed {cfg.seed})")
            sq_err_sum += batch_loss * idx.size
            dpred = (2.0 * err / idx.size)[:, None]
            grads = backward(spec, params, tape, dpred)
            if cfg.clip_norm is not None:
                clip_gradients(grads, cfg.clip_norm)
            apply(opt, params, grads)
        epoch_loss = sq_err_sum / n
        epoch_losses.append(epoch_loss)
        stopped_epoch = epoch

        if epoch_loss < best_loss - IMPROVEMENT_EPS:
            best_loss = epoch_loss
            best_params = params.copy()
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= cfg.patience:
                break

    return TrainResult(final_params=params, best_params=best_params,
                       epoch_losses=epoch_losses, stopped_epoch=stopped_epoch,
                       seed=cfg.seed)


@dataclass
class RunRecord:
    """One experiment run: training outcome plus its test-set evaluation."""

    seed: int
    status: str                      # "complete" | "failed"
    stopped_epoch: int = 0
    train_loss: float | None = None
    report: EvalReport | None = None
    retained: bool = False
    error: str = ""

    def to_record(self) -> dict:
        out = {"seed": self.seed, "status": self.status,
               "stopped_epoch": self.stopped_epoch, "train_loss": self.train_loss,
               "retained": self.retained, "error": self.error}
        out["report"] = self.report.to_record() if self.report else None
        return out

    @classmethod
    def from_record(cls, rec: dict) -> "RunRecord":
        report = EvalReport.from_record(rec["report"]) if rec.get("report") else None
        return cls(seed=rec["seed"], status=rec["status"],
                   stopped_epoch=rec.get("stopped_epoch", 0),
                   train_loss=rec.get("train_loss"), report=report,
                   retained=rec.get("retained", False), error=rec.get("error", ""))


@dataclass
class RunArchive:
    """All runs of one architecture across seeds, plus the retained subset."""

    architecture: str
    runs: list                       # RunRecord, in seed order
    results: dict = field(default_factory=dict)   # seed -> TrainResult (in-memory only)

    @property
    def retained(self) -> list:
        return [r for r in self.runs if r.retained]

    def best(self) -> RunRecord | None:
        """Best retained run: highest R^2, then lowest MAPE, then lowest RMSE."""
        candidates = self.retained
        if not candidates:
            return None
        return min(candidates,
                   key=lambda r: (-r.report.r2, r.report.mape, r.report.rmse, r.seed))

    def metric_samples(self, metric: str) -> np.ndarray:
        return np.array([getattr(r.report, metric) for r in self.retained], dtype=FLOAT)


def _run_one(args):
    spec, data, cfg, label, r2_bar = args
    try:
        result = train(spec, data, cfg)
        report = evaluate(spec, result.best_params, data, split="test",
                          seed=cfg.seed, architecture=label)
        record = RunRecord(seed=cfg.seed, status="complete",
                           stopped_epoch=result.stopped_epoch,
                           train_loss=result.best_loss, report=report,
                           retained=report.r2 > r2_bar)
        return record, result
    except (TrainingDiverged, NonFiniteGradient) as exc:
        return RunRecord(seed=cfg.seed, status="failed", error=str(exc)), None


def run_experiment(spec: NetworkSpec, data: WindowedDataset, cfg: TrainConfig,
                   repeats: int = 48, architecture: str = "",
                   r2_bar: float = R2_RETENTION_BAR, workers: int = 1,
                   on_run=None) -> RunArchive:
    """Train `repeats` times with seeds cfg.seed, cfg.seed+1, ...

    Runs with test R^2 > r2_bar are retained; all runs are archived.
    workers > 1 executes runs in processes, in deterministic seed order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    jobs = [(spec, data, replace(cfg, seed=cfg.seed + k), architecture, r2_bar)
            for k in range(repeats)]
    archive = RunArchive(architecture=architecture, runs=[])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_run_one(job))
            if on_run is not None:
                on_run(outcomes[-1][0])
    for record, result in outcomes:
        archive.runs.append(record)
        if result is not None:
            archive.results[record.seed] = result
    return archive


def save_archive(path, archive: RunArchive) -> None:
    """Line-delimited records, one per run, preceded by an archive header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"architecture": archive.architecture,
                             "n_runs": len(archive.runs)}, sort_keys=True) + "\n")
        for run in archive.runs:
            fh.write(json.dumps(run.to_record(), sort_keys=True) + "\n")


def load_archive(path) -> RunArchive:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in (l.strip() for l in fh) if line]
    if not lines:
        raise ValueError(f"{path}: empty archive")
    header = json.loads(lines[0])
    runs = [RunRecord.from_record(json.loads(line)) for line in lines[1:]]
    return RunArchive(architecture=header.get("architecture", ""), runs=runs)
