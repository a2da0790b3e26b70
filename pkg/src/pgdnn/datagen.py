"""Plate datasets: the 500-plate training grid, its splits, the out-of-domain
PWB test set, feature standardization and CSV serialization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import physics
from .physics import PWB, TRAINING_MATERIALS

CSV_COLUMNS = ("material", "t_in", "w_in", "l_in", "rho_lb_in3", "E_ksi", "nu", "fn_hz")
BASE_FEATURES = ("t_in", "w_in", "l_in", "rho_lb_in3", "E_ksi", "nu")
PHYSICS_NAMES = ("W", "D", "G")
ROLES = ("grid", "train", "validation", "test1", "test2")

# (width, length) in inches
PLANAR_SETS = (
    (2.000, 2.000),
    (1.875, 3.000),
    (5.250, 7.000),
    (6.000, 3.000),
    (10.500, 8.750),
)
THICKNESSES = tuple(round(0.030 + 0.005 * i, 3) for i in range(20))

TRAIN_POOL_SIZE = 261
INDEPENDENT_SIZE = 239
SUBSET_SIZES = (261, 117, 60, 30)

TEST2_COUNT = 101
TEST2_BOUNDS = {
    "l_in": (2.040, 9.824),
    "w_in": (2.016, 9.843),
    "t_in": (0.024, 0.216),
}

TARGET_SCALES = ("log", "linear")

# Noise draw: a Gaussian centred on the unit interval, clipped to it.
DRAW_MEAN = 0.5
DRAW_STD = 1.0 / 6.0


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class PlateSample:
    material_name: str
    thickness: float
    width: float
    length: float
    weight_density: float
    youngs_modulus: float
    poissons_ratio: float
    natural_frequency: float

    def __post_init__(self):
        if not self.natural_frequency > 0:
            raise ValueError(f"natural frequency must be positive: {self}")

    @property
    def key(self) -> tuple:
        return (self.material_name, self.thickness, self.width, self.length)

    @property
    def geometry(self) -> physics.PlateGeometry:
        return physics.PlateGeometry(self.thickness, self.width, self.length)

    @property
    def material(self) -> physics.Material:
        return physics.Material(
            self.material_name, self.weight_density, self.youngs_modulus, self.poissons_ratio
        )

    def base_vector(self) -> np.ndarray:
        return np.array(
            [
                self.thickness,
                self.width,
                self.length,
                self.weight_density,
                self.youngs_modulus,
                self.poissons_ratio,
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class Dataset:
    samples: tuple[PlateSample, ...]
    role: str = "grid"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.role not in ROLES:
            raise ValueError(f"unknown dataset role {self.role!r}")
        keys = [s.key for s in self.samples]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate plates in {self.role} dataset")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def keys(self) -> set:
        return {s.key for s in self.samples}

    def subset(self, indices: Iterable[int], role: str | None = None) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in indices), role or self.role)

    def base_features(self) -> np.ndarray:
        """(n, 6) array in the order t, w, l, rho, E, nu."""
        if not self.samples:
            return np.zeros((0, len(BASE_FEATURES)))
        return np.stack([s.base_vector() for s in self.samples])

    def physics_features(self, physics_set: Sequence[str]) -> np.ndarray:
        """(n, k) array of the requested physics features, always in W, D, G order."""
        return compute_physics(self.base_features(), physics_set)

    def targets(self) -> np.ndarray:
        return np.array([s.natural_frequency for s in self.samples], dtype=np.float64)


def normalize_physics_set(physics_set: Iterable[str]) -> tuple[str, ...]:
    chosen = set(physics_set)
    unknown = chosen - set(PHYSICS_NAMES)
    if unknown:
        raise ValueError(f"unknown physics features {sorted(unknown)}; choose from W, D, G")
    return tuple(name for name in PHYSICS_NAMES if name in chosen)


def compute_physics(base: np.ndarray, physics_set: Sequence[str]) -> np.ndarray:
    names = normalize_physics_set(physics_set)
    t, w, l, rho, e, nu = (base[:, i] for i in range(6))
    columns = {
        "W": lambda: physics.weight(t, w, l, rho),
        "D": lambda: physics.rigidity(t, e, nu),
        "G": lambda: physics.shear(e, nu),
    }
    if not names:
        return np.zeros((base.shape[0], 0))
    return np.column_stack([columns[name]() for name in names])


def _draws(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.clip(rng.normal(DRAW_MEAN, DRAW_STD, size=n), 0.0, 1.0)


def build_full_grid(seed: int = 0) -> Dataset:
    """All 5 materials x 5 planar sets x 20 thicknesses, with noisy targets."""
    rows = [
        (material, t, w, l)
        for material in TRAINING_MATERIALS
        for (w, l) in PLANAR_SETS
        for t in THICKNESSES
    ]
    draws = _draws(np.random.default_rng([seed, 1]), len(rows))
    samples = []
    for (material, t, w, l), draw in zip(rows, draws):
        exact = physics.natural_frequency(physics.PlateGeometry(t, w, l), material)
        samples.append(
            PlateSample(
                material.name,
                t,
                w,
                l,
                material.weight_density,
                material.youngs_modulus,
                material.poissons_ratio,
                physics.apply_uncertainty(exact, float(draw)),
            )
        )
    return Dataset(tuple(samples), "grid")


def split_train_independent(grid: Dataset, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Random 261/239 partition into the training pool and Test Dataset 1."""
    if len(grid) != TRAIN_POOL_SIZE + INDEPENDENT_SIZE:
        raise ValueError(f"expected a {TRAIN_POOL_SIZE + INDEPENDENT_SIZE}-sample grid, got {len(grid)}")
    order = np.random.default_rng([seed, 2]).permutation(len(grid))
    train = np.sort(order[:TRAIN_POOL_SIZE])
    independent = np.sort(order[TRAIN_POOL_SIZE:])
    return grid.subset(train, "train"), grid.subset(independent, "test1")


def nested_subset(pool: Dataset, size: int, seed: int = 0) -> Dataset:
    """Random subset of the 261-point pool; smaller sizes are prefixes of the
    same permutation, so 30 is inside 60 is inside 117."""
    if len(pool) != TRAIN_POOL_SIZE:
        raise ValueError(f"expected the {TRAIN_POOL_SIZE}-sample training pool, got {len(pool)}")
    if size not in SUBSET_SIZES:
        raise ValueError(f"unsupported training size {size}; choose from {SUBSET_SIZES}")
    if size == TRAIN_POOL_SIZE:
        return pool
    order = np.random.default_rng([seed, 3]).permutation(len(pool))
    return pool.subset(np.sort(order[:size]), "train")


def split_validation(subset: Dataset, seed: int = 0, fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    """80/20 split of a training subset into fitting and monitoring portions."""
    n = len(subset)
    n_train = int(round(n * (1.0 - fraction)))
    if not 0 < n_train < n:
        raise ValueError(f"cannot split {n} samples for validation")
    order = np.random.default_rng([seed, 4, n]).permutation(n)
    return (
        subset.subset(np.sort(order[:n_train]), "train"),
        subset.subset(np.sort(order[n_train:]), "validation"),
    )


def build_test2(seed: int = 0) -> Dataset:
    """101 PWB plates with uniformly random dimensions and exact targets."""
    rng = np.random.default_rng([seed, 5])
    lengths = rng.uniform(*TEST2_BOUNDS["l_in"], size=TEST2_COUNT)
    widths = rng.uniform(*TEST2_BOUNDS["w_in"], size=TEST2_COUNT)
    thicknesses = rng.uniform(*TEST2_BOUNDS["t_in"], size=TEST2_COUNT)
    samples = []
    for t, w, l in zip(thicknesses, widths, lengths):
        t, w, l = float(t), float(w), float(l)
        samples.append(
            PlateSample(
                PWB.name,
                t,
                w,
                l,
                PWB.weight_density,
                PWB.youngs_modulus,
                PWB.poissons_ratio,
                physics.natural_frequency(physics.PlateGeometry(t, w, l), PWB),
            )
        )
    return Dataset(tuple(samples), "test2")


@dataclass(frozen=True)
class PreparedData:
    """Every dataset a given training size needs, derived from one master seed."""

    train_size: int
    pool: Dataset
    subset: Dataset
    train: Dataset
    validation: Dataset
    test1: Dataset
    test2: Dataset


def prepare(train_size: int, seed: int = 0) -> PreparedData:
    grid = build_full_grid(seed)
    pool, test1 = split_train_independent(grid, seed)
    subset = nested_subset(pool, train_size, seed)
    train, validation = split_validation(subset, seed)
    return PreparedData(train_size, pool, subset, train, validation, test1, build_test2(seed))


@dataclass
class Standardizer:
    """Z-score statistics fitted on training samples only.

    With ``target_scale="log"`` the target is z-scored in log-frequency, which
    keeps every inverted prediction positive; ``"linear"`` z-scores raw Hz.
    """

    physics_set: tuple[str, ...]
    base_mean: np.ndarray
    base_std: np.ndarray
    physics_mean: np.ndarray
    physics_std: np.ndarray
    target_mean: float
    target_std: float
    target_scale: str = "log"

    def base(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.base_mean) / self.base_std

    def physics(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.physics_mean) / self.physics_std

    def target(self, raw: np.ndarray) -> np.ndarray:
        return (_scale_target(raw, self.target_scale) - self.target_mean) / self.target_std

    def inverse_base(self, z: np.ndarray) -> np.ndarray:
        return z * self.base_std + self.base_mean

    def inverse_physics(self, z: np.ndarray) -> np.ndarray:
        return z * self.physics_std + self.physics_mean

    def inverse_target(self, z: np.ndarray) -> np.ndarray:
        scaled = z * self.target_std + self.target_mean
        return np.exp(scaled) if self.target_scale == "log" else scaled

    def transform(self, dataset: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Standardized (base, physics, target) arrays for a dataset."""
        base = dataset.base_features()
        return (
            self.base(base),
            self.physics(compute_physics(base, self.physics_set)),
            self.target(dataset.targets()),
        )


def _scale_target(raw, scale: str):
    if scale == "log":
        return np.log(raw)
    if scale == "linear":
        return np.asarray(raw, dtype=np.float64)
    raise ValueError(f"unknown target scale {scale!r}; choose from {TARGET_SCALES}")


def _checked_stats(values: np.ndarray, names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    for name, s in zip(names, std):
        if not s > 0:
            raise ValueError(f"feature {name!r} is constant over the training samples; cannot standardize")
    return mean, std


def fit_standardizer(train: Dataset, physics_set: Iterable[str] = (), target_scale: str = "log") -> Standardizer:
    if len(train) == 0:
        raise ValueError("cannot fit a standardizer on an empty dataset")
    if train.role not in ("grid", "train"):
        raise ValueError(f"standardizer must be fitted on training data, not {train.role}")
    names = normalize_physics_set(physics_set)
    base = train.base_features()
    base_mean, base_std = _checked_stats(base, BASE_FEATURES)
    phys = compute_physics(base, names)
    phys_mean, phys_std = _checked_stats(phys, names)
    scaled = _scale_target(train.targets(), target_scale)
    t_mean, t_std = _checked_stats(scaled[:, None], ("fn_hz",))
    return Standardizer(
        names, base_mean, base_std, phys_mean, phys_std, float(t_mean[0]), float(t_std[0]), target_scale
    )


# -- CSV ----------------------------------------------------------------------


def dataset_to_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in dataset:
        writer.writerow(
            [
                s.material_name,
                repr(s.thickness),
                repr(s.width),
                repr(s.length),
                repr(s.weight_density),
                repr(s.youngs_modulus),
                repr(s.poissons_ratio),
                repr(s.natural_frequency),
            ]
        )
    return buf.getvalue()


def write_csv(dataset: Dataset, path) -> None:
    Path(path).write_text(dataset_to_csv(dataset), encoding="utf-8", newline="")


def read_csv(path, role: str = "grid") -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise DataFormatError(f"{path}: missing columns {missing}")
        index = {c: header.index(c) for c in CSV_COLUMNS}
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            values = []
            for col in CSV_COLUMNS[1:]:
                text = row[index[col]]
                try:
                    values.append(float(text))
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: column {col} is not numeric: {text!r}") from None
            try:
                samples.append(PlateSample(row[index["material"]], *values))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return Dataset(tuple(samples), role)
