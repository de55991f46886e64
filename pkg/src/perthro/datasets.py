"""Dataset construction, CSV/TSV ingestion, seeded splits and min-max scaling."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, UsageError
from .qubit import make_rng


@dataclass(frozen=True)
class Dataset:
    """Samples in rows.

    ``targets`` is always 2-D and is what the loss compares against: one-hot
    rows for classification, the desired probability vector for XOR, a single
    column for regression.  ``labels`` holds integer classes when the task is
    a classification.
    """

    features: np.ndarray
    targets: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()
    target_name: str = "target"
    kind: str = "classification"
    normalization: dict | None = None

    def __post_init__(self):
        features = np.array(self.features, dtype=float, ndmin=2)
        targets = np.array(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets[:, None]
        if features.shape[0] != targets.shape[0]:
            raise UsageError(f"{features.shape[0]} feature rows but {targets.shape[0]} target rows")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))

    def __len__(self):
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return replace(
            self,
            features=self.features[idx],
            targets=self.targets[idx],
            labels=None if self.labels is None else self.labels[idx],
        )


def xor_dataset() -> Dataset:
    """The four-row XOR truth table.

    Targets are the probability pair the threshold head reads as the right
    answer: ``(1, 0)`` for output 0 and ``(0, 1)`` for output 1.
    """
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    targets = np.column_stack([1 - y, y]).astype(float)
    return Dataset(x, targets, y, feature_names=("x1", "x2"), class_names=("0", "1"), target_name="xor")


# ---------------------------------------------------------------------------
# file ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """Layout of a delimited data file.

    ``delimiter=None`` splits on any run of whitespace (tabs included).
    """

    feature_columns: tuple[int, ...]
    target_column: int
    delimiter: str | None = ","
    header: bool = False
    kind: str = "classification"
    class_names: tuple[str, ...] = ()
    feature_names: tuple[str, ...] = ()
    target_name: str = "target"

    @property
    def num_columns(self) -> int:
        return max(*self.feature_columns, self.target_column) + 1

    def to_dict(self) -> dict:
        return asdict(self)


IRIS_SCHEMA = CsvSchema(
    feature_columns=(0, 1, 2, 3),
    target_column=4,
    delimiter=",",
    kind="classification",
    # alphabetical order fixes the one-hot layout
    class_names=("Iris-setosa", "Iris-versicolor", "Iris-virginica"),
    feature_names=("sepal_length", "sepal_width", "petal_length", "petal_width"),
    target_name="species",
)

AIRFOIL_SCHEMA = CsvSchema(
    feature_columns=(0, 1, 2, 3, 4),
    target_column=5,
    delimiter=None,
    kind="regression",
    feature_names=("frequency_hz", "angle_of_attack_deg", "chord_length_m", "velocity_m_s", "displacement_thickness_m"),
    target_name="sound_pressure_db",
)

SCHEMAS = {"iris": IRIS_SCHEMA, "airfoil": AIRFOIL_SCHEMA}


def bundled_iris_path() -> Path:
    """Path of the Iris copy shipped with the package (UCI layout)."""
    return Path(str(resources.files("perthro") / "data" / "iris.data"))


def _split_rows(text: str, schema: CsvSchema):
    if schema.delimiter is None:
        for lineno, line in enumerate(text.splitlines(), start=1):
            yield lineno, line.split()
    else:
        reader = csv.reader(io.StringIO(text), delimiter=schema.delimiter)
        for row in reader:
            yield reader.line_num, [cell.strip() for cell in row]


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Parse ``path`` according to ``schema``.

    Raises :class:`DataError` for a missing file, and names the offending
    line for a short/long row, a non-numeric cell or an unknown class label.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc

    width = schema.num_columns
    feats, raw_targets = [], []
    first = True
    for lineno, row in _split_rows(text, schema):
        if not row or all(cell == "" for cell in row):
            continue
        if first and schema.header:
            first = False
            continue
        first = False
        if len(row) != width:
            raise DataError(f"expected {width} columns, found {len(row)}", line=lineno)
        try:
            feats.append([float(row[c]) for c in schema.feature_columns])
        except ValueError as exc:
            raise DataError(f"non-numeric feature value ({exc})", line=lineno) from exc
        target = row[schema.target_column]
        if schema.kind == "classification":
            if target not in schema.class_names:
                raise DataError(f"unknown class label {target!r}", line=lineno)
            raw_targets.append(schema.class_names.index(target))
        else:
            try:
                raw_targets.append(float(target))
            except ValueError as exc:
                raise DataError(f"non-numeric target value {target!r}", line=lineno) from exc
    if not feats:
        raise DataError(f"no data rows in {path}")

    features = np.asarray(feats)
    if not np.all(np.isfinite(features)):
        raise DataError(f"non-finite feature values in {path}")
    names = schema.feature_names or tuple(f"x{c}" for c in schema.feature_columns)
    if schema.kind == "classification":
        labels = np.asarray(raw_targets, dtype=int)
        onehot = np.eye(len(schema.class_names))[labels]
        return Dataset(features, onehot, labels, names, tuple(schema.class_names), schema.target_name, "classification")
    return Dataset(features, np.asarray(raw_targets)[:, None], None, names, (), schema.target_name, "regression")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def data_manifest(path, schema: CsvSchema, split_seed, train_fraction) -> dict:
    return {
        "source": str(path),
        "sha256": file_sha256(path),
        "schema": schema.to_dict(),
        "split_seed": split_seed,
        "train_fraction": train_fraction,
    }


def write_data_manifest(out_path, path, schema: CsvSchema, split_seed, train_fraction) -> Path:
    out_path = Path(out_path)
    out_path.write_text(json.dumps(data_manifest(path, schema, split_seed, train_fraction), indent=2) + "\n")
    return out_path


# ---------------------------------------------------------------------------
# splitting and scaling
# ---------------------------------------------------------------------------


def split_indices(n: int, train_fraction: float, seed, labels=None):
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train_fraction must lie strictly between 0 and 1, got {train_fraction!r}")
    rng = make_rng(seed)
    if labels is None:
        perm = rng.permutation(n)
        k = int(round(train_fraction * n))
        return np.sort(perm[:k]), np.sort(perm[k:])
    labels = np.asarray(labels)
    train, test = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        k = int(round(train_fraction * members.size))
        train.append(members[:k])
        test.append(members[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(dataset: Dataset, train_fraction: float = 0.8, seed=0, stratify: bool | None = None):
    """Seeded train/test split; stratified per class for classification by default."""
    if stratify is None:
        stratify = dataset.labels is not None
    if stratify and dataset.labels is None:
        raise UsageError("cannot stratify a dataset without labels")
    train_idx, test_idx = split_indices(len(dataset), train_fraction, seed, dataset.labels if stratify else None)
    return dataset.subset(train_idx), dataset.subset(test_idx)


@dataclass(frozen=True)
class MinMaxStats:
    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, values) -> "MinMaxStats":
        values = np.asarray(values, dtype=float)
        return cls(values.min(axis=0), values.max(axis=0))

    @property
    def scale(self) -> np.ndarray:
        span = self.maximum - self.minimum
        return np.where(span > 0, span, 1.0)

    def transform(self, values):
        return (np.asarray(values, dtype=float) - self.minimum) / self.scale

    def inverse(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.minimum

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.minimum], "max": [float(v) for v in self.maximum]}


@dataclass(frozen=True)
class Normalizer:
    """Min-max scalers fitted on a training split only."""

    features: MinMaxStats
    targets: MinMaxStats | None = None

    @classmethod
    def fit(cls, train: Dataset, scale_targets: bool | None = None) -> "Normalizer":
        if scale_targets is None:
            scale_targets = train.kind == "regression"
        return cls(MinMaxStats.fit(train.features), MinMaxStats.fit(train.targets) if scale_targets else None)

    def apply(self, dataset: Dataset) -> Dataset:
        targets = dataset.targets if self.targets is None else self.targets.transform(dataset.targets)
        return replace(
            dataset,
            features=self.features.transform(dataset.features),
            targets=targets,
            normalization=self.to_dict(),
        )

    def invert(self, dataset: Dataset) -> Dataset:
        targets = dataset.targets if self.targets is None else self.targets.inverse(dataset.targets)
        return replace(dataset, features=self.features.inverse(dataset.features), targets=targets, normalization=None)

    def to_dict(self) -> dict:
        return {
            "features": self.features.to_dict(),
            "targets": None if self.targets is None else self.targets.to_dict(),
        }


def normalize(train: Dataset, test: Dataset | None = None, scale_targets: bool | None = None):
    """Fit min-max scaling on ``train`` and apply it to both splits."""
    norm = Normalizer.fit(train, scale_targets)
    return norm.apply(train), None if test is None else norm.apply(test), norm

