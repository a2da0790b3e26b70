"""Experiment grid, seed-averaged ensembles and result reporting."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import datagen
from .datagen import PreparedData, Standardizer
from .network import NAMED_SCHEMES, NetworkParams, scheme_label
from .trainer import ErrorSummary, TrainRecord, percentage_errors, predict_dataset, summarize, train_ensemble, write_loss_history

log = logging.getLogger(__name__)

PHYSICS_SETS = ((), ("W", "D"), ("W",), ("D",), ("G",), ("W", "D", "G"), ("D", "G"))
SCHEME_ORDER = ("none", "1", "2", "3", "4", "5", "1-4", "2-4", "2-5")
MULTI_LAYER = ("1-4", "2-4", "2-5")
TRAIN_SIZES = datagen.SUBSET_SIZES
TEST_SETS = ("test1", "test2")
ENSEMBLE_SIZE = 50
# The nominal count multiplies the no-physics row across all nine schemes.
NOMINAL_MODEL_COUNT = len(SCHEME_ORDER) * len(PHYSICS_SETS) * len(TRAIN_SIZES)

TRACE_SAMPLE_KEY = ("Stainless Steel", 0.045, 5.25, 7.0)

RESULT_COLUMNS = (
    "config_id",
    "scheme",
    "physics",
    "train_size",
    "test_set",
    "mean_err_pct",
    "median_err_pct",
    "std_err_pct",
    "min_err_pct",
    "max_err_pct",
)


def physics_label(physics_set: Sequence[str]) -> str:
    return "".join(physics_set) or "none"


def parse_physics(text: str) -> tuple[str, ...]:
    text = text.strip()
    if text.lower() in ("", "none"):
        return ()
    names = [part.strip().upper() for part in text.replace("+", ",").split(",") if part.strip()]
    if len(names) == 1 and len(names[0]) > 1:
        names = list(names[0])  # "WD" shorthand
    return datagen.normalize_physics_set(names)


@dataclass(frozen=True)
class ExperimentConfig:
    physics_set: tuple[str, ...]
    scheme: frozenset
    train_size: int
    ensemble_size: int = ENSEMBLE_SIZE
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "physics_set", datagen.normalize_physics_set(self.physics_set))
        if bool(self.physics_set) != bool(self.scheme):
            raise ValueError("physics features and injection layers must be both empty or both nonempty")
        scheme_label(self.scheme)
        if self.train_size not in TRAIN_SIZES:
            raise ValueError(f"training size must be one of {TRAIN_SIZES}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble size must be at least 1")

    @property
    def scheme_label(self) -> str:
        return scheme_label(self.scheme)

    @property
    def physics_label(self) -> str:
        return physics_label(self.physics_set)

    @property
    def config_id(self) -> str:
        return f"n{self.train_size:03d}-L{self.scheme_label}-P{self.physics_label}"


def enumerate_grid(
    master_seed: int = 0,
    ensemble_size: int = ENSEMBLE_SIZE,
    train_sizes: Iterable[int] | None = None,
    physics_sets: Iterable[Sequence[str]] | None = None,
    schemes: Iterable[frozenset] | None = None,
) -> list[ExperimentConfig]:
    """Distinct configurations: per size one baseline plus 8 schemes x 6
    physics sets.  Optional filters narrow the grid."""
    sizes = tuple(train_sizes) if train_sizes is not None else TRAIN_SIZES
    phys_filter = None if physics_sets is None else {datagen.normalize_physics_set(p) for p in physics_sets}
    scheme_filter = None if schemes is None else set(schemes)
    configs = []
    for size in sizes:
        for label in SCHEME_ORDER:
            scheme = NAMED_SCHEMES[label]
            for phys in PHYSICS_SETS:
                if bool(phys) != bool(scheme):
                    continue
                if phys_filter is not None and phys not in phys_filter:
                    continue
                if scheme_filter is not None and scheme not in scheme_filter:
                    continue
                configs.append(ExperimentConfig(phys, scheme, size, ensemble_size, master_seed))
    return sorted(configs, key=lambda c: c.config_id)


def grid_metadata() -> dict:
    per_size = 1 + (len(SCHEME_ORDER) - 1) * (len(PHYSICS_SETS) - 1)
    return {
        "nominal_model_count": NOMINAL_MODEL_COUNT,
        "distinct_configs_per_size": per_size,
        "distinct_configs": per_size * len(TRAIN_SIZES),
        "note": "the nominal count repeats the no-physics network under all nine schemes; "
        "those are one architecture and run once per training size",
    }


def replicate_seed(master_seed: int, config_id: str, index: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{config_id}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def replicate_seeds(config: ExperimentConfig) -> list[int]:
    return [replicate_seed(config.master_seed, config.config_id, i) for i in range(config.ensemble_size)]


@lru_cache(maxsize=16)
def prepared_data(train_size: int, master_seed: int) -> PreparedData:
    return datagen.prepare(train_size, master_seed)


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    seeds: list[int]
    predictions: dict[str, np.ndarray]  # mean prediction per test sample, Hz
    summaries: dict[str, ErrorSummary]
    trace: np.ndarray  # running mean of the trace sample over replicates
    trace_sample: tuple
    final_train_loss: np.ndarray
    final_val_loss: np.ndarray
    records: list[TrainRecord] = field(default_factory=list, repr=False)

    @property
    def config_id(self) -> str:
        return self.config.config_id

    def to_json(self) -> dict:
        c = self.config
        return {
            "config_id": c.config_id,
            "scheme": c.scheme_label,
            "physics": c.physics_label,
            "train_size": c.train_size,
            "ensemble_size": c.ensemble_size,
            "master_seed": c.master_seed,
            "seeds": self.seeds,
            "summaries": {k: v.as_dict() for k, v in self.summaries.items()},
            "predictions": {k: v.tolist() for k, v in self.predictions.items()},
            "trace_sample": list(self.trace_sample),
            "trace": self.trace.tolist(),
            "final_train_loss": self.final_train_loss.tolist(),
            "final_val_loss": self.final_val_loss.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EnsembleResult":
        config = ExperimentConfig(
            parse_physics(data["physics"]),
            NAMED_SCHEMES[data["scheme"]],
            int(data["train_size"]),
            int(data["ensemble_size"]),
            int(data["master_seed"]),
        )
        if config.config_id != data["config_id"]:
            raise ValueError(f"config id {data['config_id']!r} does not match its fields")
        return cls(
            config,
            [int(s) for s in data["seeds"]],
            {k: np.asarray(v) for k, v in data["predictions"].items()},
            {k: ErrorSummary(**v) for k, v in data["summaries"].items()},
            np.asarray(data["trace"]),
            tuple(data["trace_sample"]),
            np.asarray(data["final_train_loss"]),
            np.asarray(data["final_val_loss"]),
        )


def _stack(records: Sequence[TrainRecord]) -> NetworkParams:
    return NetworkParams(
        [np.stack([r.params.weights[j] for r in records]) for j in range(len(records[0].params.weights))],
        [np.stack([r.params.biases[j] for r in records]) for j in range(len(records[0].params.biases))],
    )


def trace_index(test1: datagen.Dataset) -> int:
    for i, s in enumerate(test1):
        if s.key == TRACE_SAMPLE_KEY:
            return i
    return 0


def running_mean(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.cumsum(values) / np.arange(1, len(values) + 1)


def run_ensemble(
    config: ExperimentConfig,
    data: PreparedData | None = None,
    standardizer: Standardizer | None = None,
    target_scale: str = "log",
    keep_records: bool = False,
) -> EnsembleResult:
    """Train every replicate of a configuration and score the equal-weight
    mean prediction on both test sets."""
    if data is None:
        data = prepared_data(config.train_size, config.master_seed)
    if data.train_size != config.train_size:
        raise ValueError(f"data prepared for size {data.train_size}, config wants {config.train_size}")
    if standardizer is None:
        standardizer = datagen.fit_standardizer(data.train, config.physics_set, target_scale)
    seeds = replicate_seeds(config)
    try:
        records = train_ensemble(
            data.train, data.validation, config.scheme, config.physics_set, seeds, standardizer
        )
    except FloatingPointError as exc:
        raise RuntimeError(f"{config.config_id}: {exc}") from exc

    params = _stack(records)
    per_replicate = {
        "test1": predict_dataset(params, config.scheme, data.test1, standardizer),
        "test2": predict_dataset(params, config.scheme, data.test2, standardizer),
    }
    predictions = {name: p.mean(axis=0) for name, p in per_replicate.items()}
    actual = {"test1": data.test1.targets(), "test2": data.test2.targets()}
    summaries = {name: summarize(percentage_errors(actual[name], predictions[name])) for name in TEST_SETS}
    idx = trace_index(data.test1)
    return EnsembleResult(
        config,
        seeds,
        predictions,
        summaries,
        running_mean(per_replicate["test1"][:, idx]),
        data.test1[idx].key,
        np.array([r.train_loss[-1] for r in records]),
        np.array([r.val_loss[-1] for r in records]),
        records if keep_records else [],
    )


# -- grid execution -------------------------------------------------------------


def _run_one(args) -> dict:
    config, target_scale = args
    return run_ensemble(config, target_scale=target_scale).to_json()


def run_grid(
    configs: Sequence[ExperimentConfig],
    jobs: int = 1,
    target_scale: str = "log",
    on_result: Callable[[EnsembleResult], None] | None = None,
) -> list[EnsembleResult]:
    """Run configurations serially or in worker processes.  Each run depends
    only on its own seeds, so the results are the same either way; they are
    returned sorted by config id."""
    ids = [c.config_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate configurations in grid")
    results = []

    def collect(result: EnsembleResult):
        results.append(result)
        log.info("finished %s (test1 %.2f%%, test2 %.2f%%)", result.config_id,
                 result.summaries["test1"].mean, result.summaries["test2"].mean)
        if on_result is not None:
            on_result(result)

    if jobs <= 1:
        for config in configs:
            collect(run_ensemble(config, target_scale=target_scale))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for data in pool.map(_run_one, [(c, target_scale) for c in configs]):
                collect(EnsembleResult.from_json(data))
    return sorted(results, key=lambda r: r.config_id)


# -- reporting ------------------------------------------------------------------


@dataclass
class Report:
    rows: list[dict]
    summary: dict
    pivots: dict[tuple[int, str], list[list]]  # (train_size, test_set) -> table with header row


def report(results: Sequence[EnsembleResult]) -> Report:
    if not results:
        raise ValueError("no results to report")
    ids = [r.config_id for r in results]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValueError(f"duplicate config ids: {dupes}")
    ordered = sorted(results, key=lambda r: r.config_id)

    rows = []
    for r in ordered:
        for test_set in TEST_SETS:
            s = r.summaries[test_set]
            rows.append(
                {
                    "config_id": r.config_id,
                    "scheme": r.config.scheme_label,
                    "physics": r.config.physics_label,
                    "train_size": r.config.train_size,
                    "test_set": test_set,
                    "mean_err_pct": s.mean,
                    "median_err_pct": s.median,
                    "std_err_pct": s.std,
                    "min_err_pct": s.min,
                    "max_err_pct": s.max,
                }
            )

    summary = {
        "metadata": grid_metadata(),
        "configs": {
            r.config_id: {
                "scheme": r.config.scheme_label,
                "physics": r.config.physics_label,
                "train_size": r.config.train_size,
                "ensemble_size": r.config.ensemble_size,
                "master_seed": r.config.master_seed,
                "seeds": r.seeds,
                **{f"{t}_{k}_err_pct": v for t in TEST_SETS for k, v in r.summaries[t].as_dict().items()},
            }
            for r in ordered
        },
    }

    physics_cols = [physics_label(p) for p in PHYSICS_SETS]
    pivots = {}
    for size in sorted({r.config.train_size for r in ordered}, reverse=True):
        for test_set in TEST_SETS:
            cells = {
                (r.config.scheme_label, r.config.physics_label): r.summaries[test_set].mean
                for r in ordered
                if r.config.train_size == size
            }
            table = [["scheme", *physics_cols]]
            for scheme in SCHEME_ORDER:
                table.append([scheme, *(cells.get((scheme, p), "") for p in physics_cols)])
            pivots[(size, test_set)] = table
    return Report(rows, summary, pivots)


def write_report(rep: Report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "results.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rep.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    written.append(path)
    path = out / "summary.json"
    path.write_text(json.dumps(rep.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    for (size, test_set), table in rep.pivots.items():
        path = out / f"pivot_{test_set}_n{size:03d}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in table:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        written.append(path)
    return written


def save_result(result: EnsembleResult, results_dir) -> Path:
    d = Path(results_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{result.config_id}.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(result.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def load_results(results_dir) -> list[EnsembleResult]:
    paths = sorted(Path(results_dir).glob("*.json"))
    return [EnsembleResult.from_json(json.loads(p.read_text(encoding="utf-8"))) for p in paths]


def write_trace(result: EnsembleResult, path) -> None:
    """CSV of replicate,running_mean_hz for the designated trace sample."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replicate", "running_mean_hz"])
        for i, v in enumerate(result.trace, start=1):
            writer.writerow([i, repr(float(v))])


def write_loss_histories(result: EnsembleResult, loss_dir) -> list[Path]:
    d = Path(loss_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, record in enumerate(result.records):
        path = d / f"{result.config_id}_r{i:02d}.csv"
        write_loss_history(record, path)
        paths.append(path)
    return paths
