"""Training runs, prediction in physical units and percentage-error summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .adam import adam_init, adam_step
from .datagen import Dataset, PlateSample, Standardizer, fit_standardizer, normalize_physics_set
from .network import NetworkParams, batch_loss_and_grads, forward, init_ensemble

BATCH_SIZE = 80
EPOCHS = 500


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainRecord:
    train_loss: np.ndarray  # (epochs,) standardized-target MSE
    val_loss: np.ndarray
    params: NetworkParams
    seed: int
    steps: int


@dataclass(frozen=True)
class ErrorSummary:
    mean: float
    median: float
    std: float
    min: float
    max: float

    def as_dict(self) -> dict:
        return {"mean": self.mean, "median": self.median, "std": self.std, "min": self.min, "max": self.max}


def batches_per_epoch(n: int, batch_size: int = BATCH_SIZE) -> int:
    return math.ceil(n / batch_size)


def _run_seeds(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    init, shuffle = np.random.SeedSequence(seed).spawn(2)
    return init, shuffle


def train_ensemble(
    train_set: Dataset,
    validation_set: Dataset,
    scheme: frozenset,
    physics_set: Sequence[str],
    seeds: Sequence[int],
    standardizer: Standardizer | None = None,
    epochs: int = EPOCHS,
    batch_size: int = BATCH_SIZE,
) -> list[TrainRecord]:
    """Train one network per seed, all in lock step.

    Each replicate keeps its own initialization and shuffle stream, so its
    result depends only on its own seed.
    """
    names = normalize_physics_set(physics_set)
    if bool(names) != bool(scheme):
        raise ValueError("a physics set is required exactly when the injection scheme is nonempty")
    if standardizer is None:
        standardizer = fit_standardizer(train_set, names)
    if standardizer.physics_set != names:
        raise ValueError(f"standardizer covers physics {standardizer.physics_set}, run needs {names}")
    if len(train_set) == 0:
        raise ValueError("empty training set")

    x, p, y = standardizer.transform(train_set)
    xv, pv, yv = standardizer.transform(validation_set)
    n = len(train_set)
    reps = len(seeds)
    streams = [_run_seeds(s) for s in seeds]
    params = init_ensemble(scheme, len(names), [init for init, _ in streams])
    shufflers = [np.random.default_rng(sh) for _, sh in streams]
    state = adam_init(params)

    train_hist = np.empty((reps, epochs))
    val_hist = np.empty((reps, epochs))
    for epoch in range(epochs):
        order = np.stack([rng.permutation(n) for rng in shufflers])
        total = np.zeros(reps)
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[:, start : start + batch_size]
            loss, grads = batch_loss_and_grads(params, scheme, x[idx], p[idx], y[idx])
            if not np.all(np.isfinite(loss)):
                bad = [int(seeds[i]) for i in np.flatnonzero(~np.isfinite(loss))]
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}, batch {b + 1} (seeds {bad})")
            total += loss * idx.shape[1]
            adam_step(params, grads, state)
        train_hist[:, epoch] = total / n
        if len(validation_set):
            pred, _ = forward(params, scheme, xv, pv)
            val_hist[:, epoch] = np.mean((pred - yv) ** 2, axis=-1)
        else:
            val_hist[:, epoch] = np.nan

    return [
        TrainRecord(train_hist[i].copy(), val_hist[i].copy(), params.replicate(i).copy(), int(seeds[i]), state.t)
        for i in range(reps)
    ]


def train(
    train_set: Dataset,
    validation_set: Dataset,
    scheme: frozenset,
    physics_set: Sequence[str],
    seed: int,
    standardizer: Standardizer | None = None,
    epochs: int = EPOCHS,
    batch_size: int = BATCH_SIZE,
) -> TrainRecord:
    """Fixed-length Adam training of a single network (no early stopping)."""
    (record,) = train_ensemble(
        train_set, validation_set, scheme, physics_set, [seed], standardizer, epochs, batch_size
    )
    return record


def predict_dataset(params: NetworkParams, scheme: frozenset, dataset: Dataset, standardizer: Standardizer) -> np.ndarray:
    """Predicted frequencies in Hz; stacked params give one row per replicate."""
    x, p, _ = standardizer.transform(dataset)
    z, _ = forward(params, scheme, x, p)
    return standardizer.inverse_target(z)


def predict(record: TrainRecord, scheme: frozenset, sample: PlateSample, standardizer: Standardizer) -> float:
    return float(predict_dataset(record.params, scheme, Dataset((sample,), "test1"), standardizer)[0])


def percentage_errors(actual, predicted) -> np.ndarray:
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if np.any(actual == 0):
        raise ValueError("actual frequency of zero; percentage error undefined")
    return np.abs(actual - predicted) / actual * 100.0


def summarize(errors) -> ErrorSummary:
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("no errors to summarize")
    return ErrorSummary(
        float(np.mean(errors)),
        float(np.median(errors)),
        float(np.std(errors)),
        float(np.min(errors)),
        float(np.max(errors)),
    )


def evaluate(record: TrainRecord, scheme: frozenset, test_set: Dataset, standardizer: Standardizer) -> ErrorSummary:
    if len(test_set) == 0:
        raise ValueError("empty test set")
    predicted = predict_dataset(record.params, scheme, test_set, standardizer)
    return summarize(percentage_errors(test_set.targets(), predicted))


def write_loss_history(record: TrainRecord, path) -> None:
    """CSV of epoch,train_loss,val_loss (losses in standardized-target units)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, (tl, vl) in enumerate(zip(record.train_loss, record.val_loss), start=1):
            writer.writerow([epoch, repr(float(tl)), repr(float(vl))])


def read_loss_history(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1], data[:, 2]
