"""Dataset ingestion, normalization, splitting, synthetic generators, and the
heterogeneity-controlled client partitioner."""

from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataFormatError
from .nn import Task

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus continuous targets (regression) or class labels."""

    features: np.ndarray
    targets: np.ndarray
    task: Task
    name: str = ""
    num_classes: int | None = None

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", features)
        if features.ndim != 2 or features.shape[0] < 1:
            raise ValueError(f"features must be a nonempty 2-D matrix, got {features.shape}")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite entries")
        if self.task is Task.REGRESSION:
            targets = np.ascontiguousarray(np.atleast_2d(self.targets), dtype=np.float64)
            if targets.shape[0] == 1 and features.shape[0] > 1:
                targets = targets.T
            if targets.shape[0] != features.shape[0]:
                raise ValueError("targets and features disagree on row count")
            object.__setattr__(self, "targets", targets)
        else:
            labels = np.ascontiguousarray(self.targets, dtype=np.int64).ravel()
            if labels.shape[0] != features.shape[0]:
                raise ValueError("labels and features disagree on row count")
            k = self.num_classes if self.num_classes is not None else int(labels.max()) + 1
            if labels.min() < 0 or labels.max() >= k:
                raise ValueError(f"labels must lie in [0, {k})")
            object.__setattr__(self, "targets", labels)
            object.__setattr__(self, "num_classes", k)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def output_dim(self) -> int:
        if self.task is Task.REGRESSION:
            return self.targets.shape[1]
        assert self.num_classes is not None
        return self.num_classes

    def subset(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            self.features[indices],
            self.targets[indices],
            self.task,
            name if name is not None else self.name,
            self.num_classes,
        )


@dataclass(frozen=True)
class PartitionSpec:
    n_clients: int
    heterogeneity: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if not 0.0 <= self.heterogeneity <= 1.0:
            raise ValueError("heterogeneity must lie in [0, 1]")


@dataclass(frozen=True)
class NormalizerStats:
    """Train-set z-score statistics; constant columns get std = 1."""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: np.ndarray | None = None
    target_std: np.ndarray | None = None


@dataclass(frozen=True)
class CsvSchema:
    feature_columns: tuple[int, ...]
    target_column: int
    task: Task
    has_header: bool = True
    delimiter: str = ","


def load_csv(path: str, schema: CsvSchema) -> tuple[Dataset, int]:
    """Parse a delimited text file into a Dataset.

    Rows with missing or unparseable fields are skipped; the skip count is
    returned alongside the dataset and logged as a warning.
    """
    needed = max((*schema.feature_columns, schema.target_column)) + 1
    rows: list[list[float]] = []
    targets: list[float] = []
    skipped = 0
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        first = True
        for record in reader:
            if first and schema.has_header:
                first = False
                if len(record) < needed:
                    raise DataFormatError(
                        f"{path}: header has {len(record)} columns, schema needs {needed}"
                    )
                continue
            first = False
            if not record:
                continue
            if len(record) < needed:
                skipped += 1
                continue
            try:
                feats = [float(record[c]) for c in schema.feature_columns]
                target = float(record[schema.target_column])
            except ValueError:
                skipped += 1
                continue
            if not all(math.isfinite(v) for v in feats) or not math.isfinite(target):
                skipped += 1
                continue
            rows.append(feats)
            targets.append(target)
    if skipped:
        logger.warning("%s: skipped %d malformed rows", path, skipped)
    if not rows:
        raise DataFormatError(f"{path}: no parseable rows")
    features = np.asarray(rows, dtype=np.float64)
    if schema.task is Task.REGRESSION:
        return Dataset(features, np.asarray(targets)[:, None], schema.task, name=path), skipped
    labels = np.asarray(targets)
    if not np.all(labels == np.round(labels)):
        raise DataFormatError(f"{path}: classification targets must be integer class indices")
    return Dataset(features, labels.astype(np.int64), schema.task, name=path), skipped


def _read_idx_header(buf: bytes, path: str, expected_magic: int, n_dims: int) -> tuple[tuple[int, ...], int]:
    header_len = 4 + 4 * n_dims
    if len(buf) < header_len:
        raise DataFormatError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    dims = struct.unpack(f">{n_dims}I", buf[4:header_len])
    return dims, header_len


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Load an IDX image/label pair (big-endian headers, u8 payload).

    Pixels are scaled to [0, 1] and flattened row-major.
    """
    with open(images_path, "rb") as fh:
        img_buf = fh.read()
    with open(labels_path, "rb") as fh:
        lab_buf = fh.read()
    (n_img, rows, cols), img_off = _read_idx_header(img_buf, images_path, IDX_IMAGES_MAGIC, 3)
    (n_lab,), lab_off = _read_idx_header(lab_buf, labels_path, IDX_LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise DataFormatError(
            f"image count {n_img} and label count {n_lab} disagree"
        )
    expected = n_img * rows * cols
    if len(img_buf) - img_off != expected:
        raise DataFormatError(
            f"{images_path}: expected {expected} pixel bytes, found {len(img_buf) - img_off}"
        )
    if len(lab_buf) - lab_off != n_lab:
        raise DataFormatError(
            f"{labels_path}: expected {n_lab} label bytes, found {len(lab_buf) - lab_off}"
        )
    pixels = np.frombuffer(img_buf, dtype=np.uint8, offset=img_off).reshape(n_img, rows * cols)
    labels = np.frombuffer(lab_buf, dtype=np.uint8, offset=lab_off).astype(np.int64)
    features = pixels.astype(np.float64) / 255.0
    return Dataset(features, labels, Task.CLASSIFICATION, name=images_path, num_classes=10)


def fit_normalizer(train: Dataset) -> NormalizerStats:
    """Per-column z-score statistics from the training set only."""
    f_mean = train.features.mean(axis=0)
    f_std = train.features.std(axis=0)
    f_std = np.where(f_std > 0.0, f_std, 1.0)
    if train.task is Task.REGRESSION:
        t_mean = train.targets.mean(axis=0)
        t_std = train.targets.std(axis=0)
        t_std = np.where(t_std > 0.0, t_std, 1.0)
        return NormalizerStats(f_mean, f_std, t_mean, t_std)
    return NormalizerStats(f_mean, f_std)


def apply_normalizer(stats: NormalizerStats, ds: Dataset) -> Dataset:
    features = (ds.features - stats.feature_mean) / stats.feature_std
    targets = ds.targets
    if ds.task is Task.REGRESSION and stats.target_mean is not None:
        targets = (ds.targets - stats.target_mean) / stats.target_std
    return Dataset(features, targets, ds.task, ds.name, ds.num_classes)


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle followed by a disjoint, exhaustive split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n_test = int(round(ds.n * test_fraction))
    if n_test < 1 or ds.n - n_test < 1:
        raise ValueError(f"split of {ds.n} rows at fraction {test_fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(perm[n_test:]), ds.subset(perm[:n_test])


def partition_indices(ds: Dataset, spec: PartitionSpec) -> list[np.ndarray]:
    """Global-index shards for each client under heterogeneity h.

    IID shards come from a seeded shuffle split into near-equal contiguous
    pieces; the non-IID shards from a stable sort by label. Each client takes
    floor(h * k_i) items from its sorted shard, then fills from its IID shard
    skipping indices any client already claimed from a sorted shard; remaining
    gaps are filled from the global pool of still-unused indices. The result
    is always a disjoint, exhaustive cover with sizes differing by at most 1.
    """
    n = spec.n_clients
    if n > ds.n:
        raise ValueError(f"cannot partition {ds.n} rows across {n} clients")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(ds.n)
    iid_shards = np.array_split(perm, n)
    h = spec.heterogeneity
    if ds.task is Task.REGRESSION or h == 0.0:
        # Regression data is always split uniformly, whatever h says.
        return [np.asarray(s) for s in iid_shards]

    order = np.argsort(ds.targets, kind="stable")
    sorted_shards = np.array_split(order, n)

    used = np.zeros(ds.n, dtype=bool)
    sorted_parts: list[np.ndarray] = []
    for i in range(n):
        k_i = len(iid_shards[i])
        m_i = int(math.floor(h * k_i))
        part = sorted_shards[i][:m_i]
        sorted_parts.append(part)
        used[part] = True

    parts: list[np.ndarray] = []
    shortfalls: list[int] = []
    for i in range(n):
        k_i = len(iid_shards[i])
        need = k_i - len(sorted_parts[i])
        fill = iid_shards[i][~used[iid_shards[i]]][:need]
        used[fill] = True
        parts.append(np.concatenate([sorted_parts[i], fill]))
        shortfalls.append(need - len(fill))

    if any(shortfalls):
        pool = perm[~used[perm]]
        offset = 0
        for i in range(n):
            if shortfalls[i]:
                extra = pool[offset : offset + shortfalls[i]]
                offset += shortfalls[i]
                parts[i] = np.concatenate([parts[i], extra])
    return parts


def partition(ds: Dataset, spec: PartitionSpec) -> list[Dataset]:
    """Split a training set into per-client datasets (see partition_indices)."""
    return [
        ds.subset(idx, name=f"{ds.name}/client{i}")
        for i, idx in enumerate(partition_indices(ds, spec))
    ]


class RegressionKind(str, Enum):
    SINE = "sine"
    LINEAR = "linear"


class ClassificationKind(str, Enum):
    GAUSSIAN_BLOBS = "blobs"


_LINEAR_SLOPE = 1.5
_LINEAR_INTERCEPT = -0.7


def synth_regression(kind: RegressionKind, n: int, noise_std: float, seed: int) -> Dataset:
    """1-D synthetic regression: y = sin(2 pi x) + eps or a fixed affine map."""
    kind = RegressionKind(kind)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 1))
    if kind is RegressionKind.SINE:
        clean = np.sin(2.0 * np.pi * x)
    else:
        clean = _LINEAR_SLOPE * x + _LINEAR_INTERCEPT
    y = clean + rng.normal(0.0, noise_std, size=(n, 1))
    return Dataset(x, y, Task.REGRESSION, name=f"synth-{kind.value}")


def synth_classification(
    kind: ClassificationKind, n: int, k: int, d: int, separation: float, seed: int
) -> Dataset:
    """Gaussian blobs: k unit-variance clusters with means on a scaled simplex.

    Labels are exactly balanced (counts differ by at most one) and shuffled.
    Requires d >= k so the simplex vertices separation * e_i fit.
    """
    kind = ClassificationKind(kind)
    if k > d:
        raise ValueError(f"blobs need d >= k, got k={k}, d={d}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % k)
    means = separation * np.eye(k, d)
    features = means[labels] + rng.normal(0.0, 1.0, size=(n, d))
    return Dataset(features, labels, Task.CLASSIFICATION, name="synth-blobs", num_classes=k)


def label_histogram(ds: Dataset) -> np.ndarray:
    """Class counts for a classification dataset."""
    if ds.task is not Task.CLASSIFICATION:
        raise ValueError("label_histogram needs a classification dataset")
    assert ds.num_classes is not None
    return np.bincount(ds.targets, minlength=ds.num_classes)
