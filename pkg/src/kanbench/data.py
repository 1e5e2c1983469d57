"""Dataset registry, CSV ingestion, preprocessing and batching.

The registry is a JSON manifest (``manifest.json`` shipped with the package,
or one placed in the data directory) describing where each dataset's files
live, how to parse them, and the row/feature counts they must have.

Preprocessing is fit on the training split only:

* numeric columns: train-median imputation, then (x - mean) / std with std
  floored at 1e-8 (constant columns become all zeros);
* categorical columns: train-mode imputation, then one-hot over the train
  categories (unseen test categories encode as all zeros);
* labels: contiguous indices in ``class_order`` (or sorted order).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

DATA_DIR_ENV = "KANBENCH_DATA_DIR"
SIGMA_FLOOR = 1e-8
TEST_FRACTION = 0.2


class ManifestValidationError(ValueError):
    """A dataset file does not match its manifest entry."""


class StratificationError(ValueError):
    """A class would be missing from the training split."""


class ConstantColumnWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    display_name: str
    task: str
    n_classes: int
    files: tuple[dict, ...]
    label_column: str
    expected_rows: int
    expected_features: int
    paper_features: int
    has_missing: bool = False
    data_type: str = "numerical"
    header: bool = False
    delimiter: str = ","
    columns: tuple[str, ...] | None = None
    drop_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] = ()
    positive_class: str | None = None
    class_order: tuple[str, ...] | None = None
    missing_sentinels: tuple[str, ...] = ("", "?")
    strip_label_period: bool = False
    width_scale: int = 1
    source_urls: tuple[str, ...] = ()
    notes: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        d = dict(d)
        d.pop("sha256", None)
        for key in ("files", "columns", "drop_columns", "categorical_columns", "class_order",
                    "missing_sentinels", "source_urls"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @property
    def file_names(self) -> list[str]:
        return [f["file"] for f in self.files]


def default_manifest_path() -> Path:
    return Path(str(resources.files("kanbench").joinpath("manifest.json")))


def load_manifest(path: str | os.PathLike | None = None) -> dict[str, DatasetSpec]:
    """Registry keyed by dataset name, in manifest order."""
    path = Path(path) if path is not None else default_manifest_path()
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    specs = {}
    for entry in raw["datasets"]:
        spec = DatasetSpec.from_dict(entry)
        if spec.paper_features != spec.expected_features:
            log.info("%s: source file has %d features, published table lists %d",
                     spec.name, spec.expected_features, spec.paper_features)
        specs[spec.name] = spec
    return specs


def resolve_data_dir(data_dir: str | os.PathLike | None = None) -> Path:
    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV, "data")
    return Path(data_dir)


def registry_for(data_dir: str | os.PathLike | None = None) -> dict[str, DatasetSpec]:
    """Data-dir manifest if present, else the packaged one."""
    local = resolve_data_dir(data_dir) / "manifest.json"
    return load_manifest(local if local.exists() else None)


@dataclass
class RawTable:
    feature_names: list[str]
    numeric: dict[str, np.ndarray]        # float arrays, NaN = missing
    categorical: dict[str, np.ndarray]    # object arrays, None = missing
    labels: np.ndarray                    # normalized label strings

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def has_missing(self) -> bool:
        return any(np.isnan(v).any() for v in self.numeric.values()) or any(
            (v == None).any() for v in self.categorical.values()  # noqa: E711
        )

    def take(self, idx: np.ndarray) -> "RawTable":
        return RawTable(
            list(self.feature_names),
            {k: v[idx] for k, v in self.numeric.items()},
            {k: v[idx] for k, v in self.categorical.items()},
            self.labels[idx],
        )


def _read_rows(path: Path, spec: DatasetSpec, skip_rows: int) -> tuple[list[str] | None, list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        for _ in range(skip_rows):
            fh.readline()
        if spec.delimiter == "whitespace":
            rows = [line.split() for line in fh]
        else:
            rows = list(csv.reader(fh, delimiter=spec.delimiter))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    header = None
    if spec.header and rows:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    return header, rows


def _normalize_label(value: str, strip_period: bool) -> str:
    value = value.strip()
    if strip_period and value.endswith("."):
        value = value[:-1]
    try:
        f = float(value)
    except ValueError:
        return value
    if math.isfinite(f) and f == int(f):
        return str(int(f))
    return value


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_csv(spec: DatasetSpec, data_dir: str | os.PathLike | None = None,
             check_counts: bool = True) -> RawTable:
    """Read and validate all of a dataset's files into one :class:`RawTable`."""
    data_dir = resolve_data_dir(data_dir)
    header: list[str] | None = None
    rows: list[list[str]] = []
    for entry in spec.files:
        path = data_dir / entry["file"]
        if not path.exists():
            raise FileNotFoundError(f"{spec.name}: missing file {path}")
        if entry.get("sha256") and file_sha256(path) != entry["sha256"]:
            raise ManifestValidationError(f"{spec.name}: checksum mismatch for {path}")
        file_header, file_rows = _read_rows(path, spec, int(entry.get("skip_rows", 0)))
        header = header or file_header
        rows.extend(file_rows)

    columns = list(header if spec.header else (spec.columns or []))
    expected_cols = spec.expected_features + 1 + len(spec.drop_columns)
    if check_counts and len(rows) != spec.expected_rows:
        raise ManifestValidationError(
            f"{spec.name}: expected {spec.expected_rows} rows, found {len(rows)}")
    widths = {len(r) for r in rows}
    if check_counts and widths != {expected_cols}:
        raise ManifestValidationError(
            f"{spec.name}: expected {expected_cols} columns "
            f"({spec.expected_features} features + label"
            f"{' + ' + str(len(spec.drop_columns)) + ' dropped' if spec.drop_columns else ''}), "
            f"found {sorted(widths)}")
    if not columns:
        columns = [f"c{i}" for i in range(max(widths) if widths else 0)]
    if len(columns) != max(widths, default=0):
        raise ManifestValidationError(
            f"{spec.name}: {len(columns)} column names for {max(widths, default=0)} columns")
    if spec.label_column not in columns:
        raise ManifestValidationError(f"{spec.name}: label column {spec.label_column!r} not found")

    cols = list(zip(*rows)) if rows else [()] * len(columns)
    by_name = dict(zip(columns, cols))
    sentinels = set(spec.missing_sentinels)
    feature_names = [c for c in columns if c != spec.label_column and c not in spec.drop_columns]
    numeric, categorical = {}, {}
    for name in feature_names:
        values = [v.strip() for v in by_name[name]]
        if name in spec.categorical_columns:
            categorical[name] = np.array([None if v in sentinels else v for v in values], dtype=object)
        else:
            numeric[name] = np.array([math.nan if v in sentinels else float(v) for v in values],
                                     dtype=np.float64)
    labels = np.array([_normalize_label(v, spec.strip_label_period) for v in by_name[spec.label_column]],
                      dtype=object)
    return RawTable(feature_names, numeric, categorical, labels)


def class_order_for(spec: DatasetSpec, labels: np.ndarray) -> list[str]:
    if spec.class_order is not None:
        return list(spec.class_order)
    uniq = sorted(set(labels.tolist()))
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return uniq


def stratified_split(y: np.ndarray, seed: int, test_fraction: float = TEST_FRACTION
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled 80/20 split.

    The global test size is ``n - floor((1 - test_fraction) * n)``; classes get
    ``floor`` of their share, and the leftover rows go to the largest
    fractional remainders (ties to the lower class index).
    """
    y = np.asarray(y)
    n = len(y)
    n_test = n - int(math.floor((1.0 - test_fraction) * n + 1e-9))
    classes, inverse = np.unique(y, return_inverse=True)
    counts = np.bincount(inverse, minlength=len(classes))
    share = counts * (n_test / n)
    alloc = np.floor(share).astype(np.int64)
    remainder = share - alloc
    order = sorted(range(len(classes)), key=lambda c: (-remainder[c], c))
    for c in order[: n_test - int(alloc.sum())]:
        alloc[c] += 1
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(len(classes)):
        idx = np.flatnonzero(inverse == c)
        idx = idx[rng.permutation(len(idx))]
        if counts[c] - alloc[c] < 1:
            raise StratificationError(f"class {classes[c]!r} has no training rows")
        test.append(idx[: alloc[c]])
        train.append(idx[alloc[c]:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class Encoder:
    """Train-fitted transform from a :class:`RawTable` to a standardized matrix."""

    numeric_columns: list[str]
    categorical_columns: list[str]
    medians: dict[str, float]
    means: dict[str, float]
    stds: dict[str, float]
    modes: dict[str, str]
    categories: dict[str, list[str]]
    class_order: list[str]

    @classmethod
    def fit(cls, raw: RawTable, class_order: Sequence[str]) -> "Encoder":
        medians, means, stds, modes, categories = {}, {}, {}, {}, {}
        for name, col in raw.numeric.items():
            present = col[~np.isnan(col)]
            med = float(np.median(present)) if present.size else 0.0
            filled = np.where(np.isnan(col), med, col)
            std = float(filled.std())
            if std < SIGMA_FLOOR:
                warnings.warn(f"column {name!r} is constant on the training split; "
                              "standardized to zeros", ConstantColumnWarning, stacklevel=2)
            medians[name], means[name], stds[name] = med, float(filled.mean()), max(std, SIGMA_FLOOR)
        for name, col in raw.categorical.items():
            present = [v for v in col.tolist() if v is not None]
            cats = sorted(set(present))
            if present:
                vals, cnt = np.unique(np.array(present, dtype=object), return_counts=True)
                # argmax picks the first maximum: ties go to the lexicographically first category
                modes[name] = str(vals[int(np.argmax(cnt))])
            else:
                modes[name] = ""
                cats = [""]
            categories[name] = cats
        return cls(list(raw.numeric), list(raw.categorical), medians, means, stds, modes,
                   categories, list(class_order))

    @property
    def output_names(self) -> list[str]:
        names = list(self.numeric_columns)
        for name in self.categorical_columns:
            names.extend(f"{name}={c}" for c in self.categories[name])
        return names

    def transform(self, raw: RawTable) -> np.ndarray:
        blocks = []
        for name in self.numeric_columns:
            col = raw.numeric[name]
            col = np.where(np.isnan(col), self.medians[name], col)
            blocks.append(((col - self.means[name]) / self.stds[name])[:, None])
        for name in self.categorical_columns:
            col = raw.categorical[name]
            mode = self.modes[name]
            col = np.array([mode if v is None else v for v in col.tolist()], dtype=object)
            cats = self.categories[name]
            onehot = (col[:, None] == np.array(cats, dtype=object)[None, :]).astype(np.float64)
            blocks.append(onehot)
        if not blocks:
            return np.zeros((raw.n_rows, 0))
        return np.ascontiguousarray(np.hstack(blocks))

    def encode_labels(self, labels: np.ndarray) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.class_order)}
        unknown = sorted({v for v in labels.tolist() if v not in index})
        if unknown:
            raise ManifestValidationError(f"labels {unknown} not in class order {self.class_order}")
        return np.array([index[v] for v in labels.tolist()], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "numeric_columns": self.numeric_columns,
            "categorical_columns": self.categorical_columns,
            "medians": self.medians, "means": self.means, "stds": self.stds,
            "modes": self.modes, "categories": self.categories,
            "class_order": self.class_order,
        }


@dataclass(frozen=True)
class PreparedDataset:
    spec: DatasetSpec
    X_train: np.ndarray
    X_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray
    train_index: np.ndarray
    test_index: np.ndarray
    encoder: Encoder
    split_seed: int
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        for arr in (self.X_train, self.X_test, self.y_train, self.y_test):
            arr.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.encoder.class_order)

    @property
    def positive_index(self) -> int | None:
        if self.spec.task != "binary" or self.spec.positive_class is None:
            return None
        return self.encoder.class_order.index(self.spec.positive_class)


def preprocess(raw: RawTable, spec: DatasetSpec, split_seed: int) -> PreparedDataset:
    order = class_order_for(spec, raw.labels)
    train_idx, test_idx = stratified_split(raw.labels, split_seed)
    train_raw, test_raw = raw.take(train_idx), raw.take(test_idx)
    encoder = Encoder.fit(train_raw, order)
    y_train = encoder.encode_labels(train_raw.labels)
    present = np.bincount(y_train, minlength=len(order))
    if (present == 0).any():
        missing = [order[i] for i in np.flatnonzero(present == 0)]
        raise StratificationError(f"{spec.name}: classes {missing} absent from the training split")
    return PreparedDataset(
        spec=spec,
        X_train=encoder.transform(train_raw),
        X_test=encoder.transform(test_raw),
        y_train=y_train,
        y_test=encoder.encode_labels(test_raw.labels),
        train_index=train_idx,
        test_index=test_idx,
        encoder=encoder,
        split_seed=split_seed,
        feature_names=encoder.output_names,
    )


def batches(prepared: PreparedDataset, batch_size: int, shuffle_seed: int, epoch: int = 0
            ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Shuffled mini-batches of the training split; the last short batch is kept."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    n = prepared.X_train.shape[0]
    perm = np.random.default_rng([shuffle_seed, epoch]).permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        yield prepared.X_train[idx], prepared.y_train[idx]


@dataclass
class ValidationRow:
    name: str
    ok: bool
    message: str


def validate_dataset(spec: DatasetSpec, data_dir: str | os.PathLike | None = None) -> ValidationRow:
    try:
        raw = load_csv(spec, data_dir)
    except FileNotFoundError as exc:
        return ValidationRow(spec.name, False, str(exc))
    except (ManifestValidationError, ValueError, OSError, UnicodeDecodeError) as exc:
        return ValidationRow(spec.name, False, str(exc))
    msg = f"{raw.n_rows} rows, {len(raw.feature_names)} features"
    if spec.paper_features != spec.expected_features:
        msg += f" (published table lists {spec.paper_features})"
    return ValidationRow(spec.name, True, msg)
