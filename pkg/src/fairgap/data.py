"""CSV ingestion, preprocessing, splitting and synthetic two-group data."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

log = logging.getLogger(__name__)

MISSING_TOKENS = {"", "?", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = "numeric"

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ConfigError(f"column {self.name!r}: kind must be numeric or categorical")


@dataclass
class DatasetSchema:
    feature_columns: list
    target_column: str
    group_column: str
    # "drop" removes incomplete rows, "mean" imputes numeric columns
    missing: str = "drop"

    def __post_init__(self):
        self.feature_columns = [
            c if isinstance(c, ColumnSpec) else ColumnSpec(**c) for c in self.feature_columns
        ]
        names = [c.name for c in self.feature_columns]
        if self.target_column in names or self.group_column in names:
            raise ConfigError("target and group columns must not be listed as features")
        if self.missing not in ("drop", "mean"):
            raise ConfigError("missing policy must be 'drop' or 'mean'")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        try:
            return cls(
                feature_columns=d["features"],
                target_column=d["target"],
                group_column=d["group"],
                missing=d.get("missing", "drop"),
            )
        except KeyError as e:
            raise ConfigError(f"schema is missing field {e.args[0]!r}") from None
        except TypeError as e:
            raise ConfigError(f"schema: {e}") from None

    def to_dict(self) -> dict:
        return {
            "features": [{"name": c.name, "kind": c.kind} for c in self.feature_columns],
            "target": self.target_column,
            "group": self.group_column,
            "missing": self.missing,
        }


@dataclass
class RawTable:
    columns: dict
    n_rows: int
    n_dropped: int = 0


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    feature_names: list = field(default_factory=list)
    # per retained column, fitted on the training split
    norm_mean: Optional[np.ndarray] = None
    norm_std: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        self.a = np.asarray(self.a).ravel().astype(np.int64)
        if self.x.ndim != 2 or not (self.x.shape[0] == self.y.size == self.a.size):
            raise DomainError("x, y and a must agree on the number of rows")
        if not np.isin(self.a, (0, 1)).all():
            raise DomainError("group labels must be 0 or 1")
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(self.x.shape[1])]

    @property
    def n(self) -> int:
        return self.y.size

    def subset(self, idx) -> "Dataset":
        return Dataset(
            self.x[idx], self.y[idx], self.a[idx], list(self.feature_names),
            self.norm_mean, self.norm_std,
        )


def _is_missing(s: str) -> bool:
    return s.strip().lower() in MISSING_TOKENS


def load_csv(path, schema: DatasetSchema) -> RawTable:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DomainError(f"{path}: no header row")
        header = [h.strip() for h in header]
        used = [c.name for c in schema.feature_columns] + [schema.target_column, schema.group_column]
        missing = [c for c in used if c not in header]
        if missing:
            raise DomainError(f"{path}: missing columns {missing}")
        pos = {c: header.index(c) for c in used}
        rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DomainError(f"{path}: no data rows")

    kinds = {c.name: c.kind for c in schema.feature_columns}
    kinds[schema.target_column] = "numeric"
    kinds[schema.group_column] = "group"
    cols = {c: [] for c in used}
    dropped = 0
    for lineno, r in enumerate(rows, start=2):
        cells = {c: (r[pos[c]].strip() if pos[c] < len(r) else "") for c in used}
        incomplete = [c for c in used if _is_missing(cells[c])]
        if incomplete and (schema.missing == "drop" or any(kinds[c] != "numeric" or c == schema.target_column for c in incomplete)):
            dropped += 1
            continue
        for c in used:
            v = cells[c]
            if kinds[c] == "categorical":
                cols[c].append(v)
            elif _is_missing(v):
                cols[c].append(math.nan)
            elif kinds[c] == "group":
                if v not in ("0", "1"):
                    raise DomainError(
                        f"{path}:{lineno}: group column {c!r} has value {v!r}, expected 0 or 1"
                    )
                cols[c].append(int(v))
            else:
                try:
                    cols[c].append(float(v))
                except ValueError:
                    raise DomainError(f"{path}:{lineno}: column {c!r} value {v!r} is not numeric") from None
    n = len(cols[schema.group_column])
    if n == 0:
        raise DomainError(f"{path}: every row had missing values")
    if dropped:
        log.info("dropped %d rows with missing values from %s", dropped, path)
    return RawTable(cols, n, dropped)


def preprocess(raw: RawTable, schema: DatasetSchema, fit_on) -> Dataset:
    """One-hot categoricals and z-score every column with train-split statistics.

    Numeric missing values (``missing='mean'``) are imputed with the train mean.
    Zero-variance columns on the train split are dropped.
    """
    fit_on = np.asarray(fit_on, dtype=np.int64)
    if fit_on.size == 0:
        raise DomainError("fit_on must select at least one row")
    blocks, names = [], []
    for col in schema.feature_columns:
        vals = raw.columns[col.name]
        if col.kind == "categorical":
            arr = np.asarray(vals, dtype=object)
            for level in sorted(set(arr[fit_on].tolist()) | set(arr.tolist())):
                blocks.append((arr == level).astype(np.float64))
                names.append(f"{col.name}={level}")
        else:
            arr = np.asarray(vals, dtype=np.float64)
            if np.isnan(arr).any():
                fill = np.nanmean(arr[fit_on])
                if np.isnan(fill):
                    raise DomainError(f"column {col.name!r} has no training values to impute from")
                arr = np.where(np.isnan(arr), fill, arr)
            blocks.append(arr)
            names.append(col.name)
    if not blocks:
        raise DomainError("schema lists no feature columns")
    x = np.column_stack(blocks)
    mean = x[fit_on].mean(axis=0)
    std = x[fit_on].std(axis=0)
    keep = std > 0
    if not keep.any():
        raise DomainError("every feature column is constant on the training split")
    if not keep.all():
        log.warning("dropping zero-variance columns: %s", [n for n, k in zip(names, keep) if not k])
    x = (x[:, keep] - mean[keep]) / std[keep]
    return Dataset(
        x,
        np.asarray(raw.columns[schema.target_column], dtype=np.float64),
        np.asarray(raw.columns[schema.group_column], dtype=np.int64),
        [n for n, k in zip(names, keep) if k],
        mean[keep],
        std[keep],
    )


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise DomainError("test_fraction must lie in (0, 1)")
    n_test = int(math.floor(n * test_fraction + 1e-9))
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(dataset.n, test_fraction, seed)
    train, test = dataset.subset(tr), dataset.subset(te)
    for name, part in (("train", train), ("test", test)):
        if part.n and np.unique(part.a).size < 2:
            log.warning("%s split contains only group %d", name, part.a[0])
    return train, test


def load_and_prepare(path, schema: DatasetSchema, test_fraction: float, seed: int):
    """Load a CSV, fit preprocessing on the train split, return (train, test, raw)."""
    raw = load_csv(path, schema)
    tr, te = split_indices(raw.n_rows, test_fraction, seed)
    ds = preprocess(raw, schema, tr)
    return ds.subset(tr), ds.subset(te), raw


@dataclass
class SyntheticSpec:
    """Two-group regression data.

    Latent features are standard normal and ``y = s_a * w.x + shift_a + e_a``
    with ``e_a ~ N(0, noise_a^2)``, ``shift_0 = 0``, ``shift_1 = label_mean_shift``.
    The optional ``feature_noise_scale`` corrupts the first
    ``noisy_features`` observed columns of group ``a`` with N(0, sigma_a^2)
    (all columns when ``noisy_features`` is None).
    """

    n_per_group: tuple = (1000, 1000)
    feature_dim: int = 8
    label_mean_shift: float = 0.0
    label_scale: tuple = (1.0, 1.0)
    conditional_noise_scale: tuple = (0.1, 0.1)
    feature_noise_scale: tuple = (0.0, 0.0)
    noisy_features: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n_per_group, int):
            self.n_per_group = (self.n_per_group, self.n_per_group)
        self.n_per_group = tuple(int(v) for v in self.n_per_group)
        self.label_scale = tuple(float(v) for v in self.label_scale)
        self.conditional_noise_scale = tuple(float(v) for v in self.conditional_noise_scale)
        self.feature_noise_scale = tuple(float(v) for v in self.feature_noise_scale)
        if len(self.n_per_group) != 2 or min(self.n_per_group) <= 0:
            raise ConfigError("n_per_group must be two positive counts")
        if self.feature_dim <= 0:
            raise ConfigError("feature_dim must be positive")
        if min(self.label_scale) <= 0:
            raise ConfigError("label_scale entries must be positive")
        if min(self.conditional_noise_scale) < 0 or min(self.feature_noise_scale) < 0:
            raise ConfigError("noise scales must be non-negative")
        if self.noisy_features is not None and not 0 <= self.noisy_features <= self.feature_dim:
            raise ConfigError("noisy_features must lie in [0, feature_dim]")


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    d = spec.feature_dim
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    shifts = (0.0, spec.label_mean_shift)
    n_noisy = d if spec.noisy_features is None else spec.noisy_features
    xs, ys, groups = [], [], []
    for a in (0, 1):
        n = spec.n_per_group[a]
        x = rng.standard_normal((n, d))
        y = spec.label_scale[a] * (x @ w) + shifts[a]
        y += spec.conditional_noise_scale[a] * rng.standard_normal(n)
        x_obs = x.copy()
        x_obs[:, :n_noisy] += spec.feature_noise_scale[a] * rng.standard_normal((n, n_noisy))
        xs.append(x_obs)
        ys.append(y)
        groups.append(np.full(n, a))
    return Dataset(np.vstack(xs), np.concatenate(ys), np.concatenate(groups))


def write_dataset_csv(ds: Dataset, path) -> None:
    """Write x columns, then y and a; floats use shortest round-trip repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + ["y", "a"])
        for row, y, a in zip(ds.x, ds.y, ds.a):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y)), str(int(a))])


def dataset_schema_for(ds_or_names: Sequence) -> DatasetSchema:
    names = ds_or_names.feature_names if isinstance(ds_or_names, Dataset) else list(ds_or_names)
    return DatasetSchema([ColumnSpec(n) for n in names], "y", "a")


def read_dataset_csv(path) -> Dataset:
    """Inverse of :func:`write_dataset_csv` (no normalisation applied)."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    names = header[:-2]
    raw = load_csv(path, dataset_schema_for(names))
    x = np.column_stack([np.asarray(raw.columns[c], dtype=np.float64) for c in names])
    return Dataset(x, raw.columns["y"], raw.columns["a"], names)
