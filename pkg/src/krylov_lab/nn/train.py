"""Minibatch training loop and RMSE evaluation."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedTrainingError, InvalidArgumentError
from ..kcx import atomic_open
from ..numerics import Rng
from .network import Network, build_network, mse_loss
from .optim import Adam, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    kernel: int = 5

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise InvalidArgumentError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    wall_time: float


@dataclass
class History:
    rows: list[EpochRecord] = field(default_factory=list)

    @property
    def train_loss(self) -> np.ndarray:
        return np.array([r.train_loss for r in self.rows])

    @property
    def val_loss(self) -> np.ndarray:
        return np.array([r.val_loss for r in self.rows])

    def csv_text(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        lines += [f"{r.epoch},{r.train_loss!r},{r.val_loss!r}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with atomic_open(path, newline="") as fh:
            fh.write(self.csv_text())


def split_loss(network: Network, data, batch_size: int = 1024) -> float:
    """MSE over every record of ``data`` at once."""
    return mse_loss(network.predict(data.features, batch_size), data.targets)


def train(network: Network, dataset, config: TrainConfig, progress=None):
    """Train ``network`` in place on the dataset's train split.

    Each epoch shuffles the train records with a stream derived from
    ``config.seed``, walks them in minibatches (the last, possibly smaller,
    batch included) and then scores the whole validation split.
    """
    train_data, val_data = dataset.subset("train"), dataset.subset("val")
    if len(train_data) == 0 or len(val_data) == 0:
        raise InvalidArgumentError("training needs non-empty train and val splits")
    shuffle_rng = Rng(config.seed).spawn(1)
    opt = Adam([p for _, p in network.parameters()], config.learning_rate, config.beta1,
               config.beta2, config.eps)
    history = History()
    start = time.perf_counter()
    n, bs = len(train_data), config.batch_size
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, bs)):
            idx = order[lo:lo + bs]
            loss, grads = network.loss_and_grads(train_data.features[idx], train_data.targets[idx])
            if not np.isfinite(loss):
                raise DivergedTrainingError(epoch, b, loss)
            adam_step(network, grads, opt)
            total += loss * len(idx)
        val = split_loss(network, val_data)
        if not np.isfinite(val):
            raise DivergedTrainingError(epoch, "validation", val)
        row = EpochRecord(epoch, total / n, val, time.perf_counter() - start)
        history.rows.append(row)
        log.debug("epoch %d train %.6g val %.6g", epoch, row.train_loss, row.val_loss)
        if progress is not None:
            progress(row)
    network.optimizer = opt
    return network, history


def fit(dataset, spec: dict, config: TrainConfig, progress=None):
    """Build a Glorot-initialized network from ``spec`` and train it."""
    net = build_network(spec, Rng(config.seed).spawn(0))
    return train(net, dataset, config, progress)


@dataclass
class RmseReport:
    overall: float
    time_indices: np.ndarray
    per_time_bin: np.ndarray
    predictions: np.ndarray

    @property
    def time_averaged(self) -> float:
        return float(np.mean(self.per_time_bin))


def rmse_report(predictions, targets, time_index) -> RmseReport:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.size == 0:
        raise InvalidArgumentError("cannot evaluate an empty split")
    err2 = (p - t) ** 2
    bins, inverse = np.unique(np.asarray(time_index), return_inverse=True)
    per_bin = np.sqrt(np.bincount(inverse, weights=err2) / np.bincount(inverse))
    return RmseReport(float(np.sqrt(err2.mean())), bins, per_bin, p)


def evaluate_rmse(network: Network, data) -> RmseReport:
    """Overall and per-time-index RMSE of normalized predictions."""
    if len(data) == 0:
        raise InvalidArgumentError("cannot evaluate an empty split")
    return rmse_report(network.predict(data.features), data.targets, data.time_index)


def mean_predictor_rmse(targets, mean=None) -> float:
    t = np.asarray(targets, dtype=np.float64)
    mu = t.mean() if mean is None else mean
    return float(np.sqrt(np.mean((t - mu) ** 2)))


def write_bins_csv(report: RmseReport, targets, time_index, n: int, path) -> None:
    """Per-time-bin mean prediction, mean truth and RMSE."""
    time_index = np.asarray(time_index)
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "t_over_N", "mean_pred", "mean_truth", "rmse"])
        for t, r in zip(report.time_indices, report.per_time_bin):
            sel = time_index == t
            w.writerow([int(t), repr(t / n), repr(float(report.predictions[sel].mean())),
                        repr(float(np.mean(np.asarray(targets)[sel]))), repr(float(r))])
