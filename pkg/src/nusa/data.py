"""Datasets: synthetic Gaussian classes, CSV ingestion, known/unknown splits.

The CSV format is UTF-8, comma separated, one header row, one label column
(default name "label"), every other column a numeric feature.  String labels
are remapped to dense indices by first appearance; numeric labels keep their
numeric order.
"""

import csv
import itertools
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidInputError
from .rng import Xorshift64Star, derive_seed

_MEAN_REJECTION_TRIES = 1000


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) ints in [0, num_classes)
    class_names: list[str] | None = None
    num_classes: int = 0  # 0: derive from labels

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise InvalidInputError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise InvalidInputError("labels must match the number of feature rows")
        if not np.all(np.isfinite(self.features)):
            raise InvalidInputError("features contain non-finite values")
        if self.labels.size and self.labels.min() < 0:
            raise InvalidInputError("labels must be non-negative")
        if self.num_classes == 0:
            self.num_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        elif self.labels.size and int(self.labels.max()) >= self.num_classes:
            raise InvalidInputError("label out of range for num_classes")

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class SplitSpec:
    """Known/unknown class partition plus the train fraction for known classes."""

    known_classes: tuple[int, ...]
    unknown_classes: tuple[int, ...]
    train_fraction: float
    rng_seed: int

    def __post_init__(self):
        known, unknown = set(self.known_classes), set(self.unknown_classes)
        if known & unknown:
            raise InvalidInputError("known and unknown classes overlap")
        if len(self.known_classes) < 2:
            raise InvalidInputError("need at least 2 known classes")
        if not (0.0 < self.train_fraction < 1.0):
            raise InvalidInputError("train_fraction must be in (0, 1)")


def make_split_spec(known_classes, num_classes: int, train_fraction: float,
                    rng_seed: int) -> SplitSpec:
    known = tuple(int(c) for c in known_classes)
    if any(not (0 <= c < num_classes) for c in known):
        raise InvalidInputError("known class out of range")
    unknown = tuple(c for c in range(num_classes) if c not in set(known))
    return SplitSpec(known, unknown, train_fraction, rng_seed)


def generate_gaussian_classes(num_classes: int, dim: int, separation: float,
                              samples_per_class: int, seed: int) -> LabeledDataset:
    """Unit-covariance Gaussian blobs at seeded random directions.

    Class means sit at ``separation`` times random unit directions, re-drawn
    until all pairwise mean distances reach ``separation / 2``.  Everything
    is deterministic given the seed.
    """
    if num_classes < 1 or dim < 1 or samples_per_class < 1:
        raise InvalidInputError("counts must be >= 1")
    if separation <= 0:
        raise InvalidInputError("separation must be positive")
    rng = Xorshift64Star(derive_seed(seed, 0xDA7A))
    means = []
    for _ in range(num_classes):
        for _ in range(_MEAN_REJECTION_TRIES):
            candidate = separation * rng.unit_vector(dim)
            if all(np.linalg.norm(candidate - m) >= separation / 2 for m in means):
                means.append(candidate)
                break
        else:
            raise InvalidInputError(
                "could not place class means; increase dim or reduce num_classes"
            )
    features = np.empty((num_classes * samples_per_class, dim))
    labels = np.empty(num_classes * samples_per_class, dtype=np.int64)
    row = 0
    for c, mean in enumerate(means):
        for _ in range(samples_per_class):
            features[row] = mean + rng.normals(dim)
            labels[row] = c
            row += 1
    return LabeledDataset(features, labels, class_names=[str(c) for c in range(num_classes)])


def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(
            f"row {row}, column {column!r}: non-numeric value {text!r}"
        ) from exc


def load_csv(path: str, label_column: str = "label",
             require_label: bool = True) -> LabeledDataset:
    """Read a feature CSV; parse errors carry row and column locations.

    With ``require_label`` False a missing label column yields all-zero
    labels (useful for scoring unlabeled data).
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_label = label_column in header
        if require_label and not has_label:
            raise DataError(f"{path}: label column {label_column!r} not found")
        label_idx = header.index(label_column) if has_label else -1
        feature_columns = [(i, name) for i, name in enumerate(header) if i != label_idx]
        if not feature_columns:
            raise DataError(f"{path}: no feature columns")
        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for row_num, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(
                    f"row {row_num}: expected {len(header)} cells, got {len(record)}"
                )
            rows.append([_parse_cell(record[i], row_num, name) for i, name in feature_columns])
            if has_label:
                raw_labels.append(record[label_idx].strip())
    if not rows:
        raise DataError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=float)
    if not has_label:
        return LabeledDataset(features, np.zeros(len(rows), dtype=np.int64), None)
    labels, class_names = _remap_labels(raw_labels)
    return LabeledDataset(features, labels, class_names)


def _remap_labels(raw: list[str]):
    numeric = True
    parsed: list[float] = []
    for text in raw:
        try:
            parsed.append(float(text))
        except ValueError:
            numeric = False
            break
    if numeric:
        ordered = sorted(set(parsed))
        mapping = {value: i for i, value in enumerate(ordered)}
        labels = np.array([mapping[v] for v in parsed], dtype=np.int64)
        names = [_format_label(v) for v in ordered]
    else:
        names = []
        seen: dict[str, int] = {}
        indices = []
        for text in raw:
            if text not in seen:
                seen[text] = len(names)
                names.append(text)
            indices.append(seen[text])
        labels = np.array(indices, dtype=np.int64)
    return labels, names


def _format_label(value: float) -> str:
    return str(int(value)) if value == int(value) else repr(value)


def save_csv(dataset: LabeledDataset, path: str, label_column: str = "label") -> None:
    """Write a dataset in the ingestion format (atomic, full float precision)."""
    header = [f"f{i}" for i in range(dataset.dim)] + [label_column]
    lines = [",".join(header)]
    for row, label in zip(dataset.features, dataset.labels):
        name = (
            dataset.class_names[label]
            if dataset.class_names is not None
            else str(int(label))
        )
        lines.append(",".join([repr(float(v)) for v in row] + [name]))
    text = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def split_known_unknown(data: LabeledDataset, spec: SplitSpec):
    """Partition into (train, test_inliers, test_outliers).

    Known-class samples are split per class (stratified) by seeded shuffling;
    every unknown-class sample goes to the outlier test set.  Train and
    inlier-test labels are remapped to 0..len(known)-1 in the order given by
    the spec; outlier labels keep their original values.
    """
    all_classes = set(spec.known_classes) | set(spec.unknown_classes)
    if all_classes != set(range(data.num_classes)):
        raise InvalidInputError("split classes do not cover the dataset's classes")
    remap = {c: i for i, c in enumerate(spec.known_classes)}
    train_idx: list[int] = []
    test_idx: list[int] = []
    for position, cls in enumerate(spec.known_classes):
        members = np.nonzero(data.labels == cls)[0]
        if members.size < 2:
            raise InvalidInputError(f"known class {cls} has fewer than 2 samples")
        rng = Xorshift64Star(derive_seed(spec.rng_seed, 0x59171, position))
        members = members[rng.permutation(members.size)]
        n_train = int(round(spec.train_fraction * members.size))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.extend(members[:n_train])
        test_idx.extend(members[n_train:])
    outlier_idx = [i for i in range(data.size) if data.labels[i] in set(spec.unknown_classes)]
    known_names = (
        [data.class_names[c] for c in spec.known_classes]
        if data.class_names is not None
        else None
    )

    def subset(indices, remap_labels: bool):
        indices = np.asarray(indices, dtype=int)
        labels = data.labels[indices]
        if remap_labels:
            labels = np.array([remap[int(l)] for l in labels], dtype=np.int64)
            return LabeledDataset(data.features[indices], labels, known_names,
                                  num_classes=len(spec.known_classes))
        return LabeledDataset(data.features[indices], labels, data.class_names,
                              num_classes=data.num_classes)

    return subset(train_idx, True), subset(test_idx, True), subset(outlier_idx, False)


def enumerate_class_combinations(num_classes: int, num_known: int) -> list[tuple[int, ...]]:
    """All size-``num_known`` subsets of range(num_classes), lexicographic."""
    if not (2 <= num_known <= num_classes - 1):
        raise InvalidInputError(
            f"num_known must be in [2, {num_classes - 1}], got {num_known}"
        )
    return list(itertools.combinations(range(num_classes), num_known))
