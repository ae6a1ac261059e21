"""Dataset ingestion, label binarization, and feature scaling.

Supported on-disk formats:

* CSV with an optional header row.  The label column is named via
  ``label_column`` (header name or integer position); by default the last
  column is the label.
* SVMLight / libsvm sparse lines ``<label> <idx>:<val> ...`` with 1-based
  indices, densified on load.

Raw labels are mapped onto {0, 1} by an explicit rule string:

* ``identity``      labels are already 0/1
* ``minus-plus``    {-1, +1} -> {0, 1}
* ``pair:a,b``      keep only rows labeled a or b; a -> 0, b -> 1
* ``range:k``       labels <= k -> 0, labels > k -> 1 (all rows kept)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError


@dataclass
class Dataset:
    """A dense train/test split with binary {0, 1} labels."""

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self) -> None:
        self.X_train = np.asarray(self.X_train, dtype=np.float64)
        self.X_test = np.asarray(self.X_test, dtype=np.float64)
        self.y_train = np.asarray(self.y_train, dtype=np.float64)
        self.y_test = np.asarray(self.y_test, dtype=np.float64)
        if self.X_train.shape[0] != self.y_train.shape[0]:
            raise DataError("train rows do not match train labels")
        if self.X_test.shape[0] != self.y_test.shape[0]:
            raise DataError("test rows do not match test labels")
        if self.X_train.shape[1] != self.X_test.shape[1]:
            raise DataError(
                f"train has {self.X_train.shape[1]} features, test {self.X_test.shape[1]}"
            )
        for name, arr in (("train", self.X_train), ("test", self.X_test)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise DataError(f"{name} features contain non-finite values")
        for name, arr in (("train", self.y_train), ("test", self.y_test)):
            bad = ~np.isin(arr, (0.0, 1.0))
            if np.any(bad):
                raise DataError(f"{name} labels outside {{0, 1}} after binarization")

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]

    @property
    def n_test(self) -> int:
        return self.X_test.shape[0]


# ---------------------------------------------------------------------------
# label rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelRule:
    kind: str
    params: tuple[float, ...] = ()

    def apply(self, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map raw labels to {0, 1}.  Returns (keep_mask, mapped_labels)."""
        raw = np.asarray(raw, dtype=np.float64)
        if self.kind == "identity":
            bad = ~np.isin(raw, (0.0, 1.0))
            if np.any(bad):
                raise DataError(
                    f"identity label rule saw value {raw[bad][0]!r}; labels must be 0/1"
                )
            return np.ones(len(raw), dtype=bool), raw
        if self.kind == "minus-plus":
            bad = ~np.isin(raw, (-1.0, 1.0))
            if np.any(bad):
                raise DataError(
                    f"minus-plus label rule saw value {raw[bad][0]!r}; labels must be -1/+1"
                )
            return np.ones(len(raw), dtype=bool), (raw + 1.0) / 2.0
        if self.kind == "pair":
            neg, pos = self.params
            mask = np.isin(raw, (neg, pos))
            return mask, (raw[mask] == pos).astype(np.float64)
        if self.kind == "range":
            (split,) = self.params
            return np.ones(len(raw), dtype=bool), (raw > split).astype(np.float64)
        raise ConfigurationError(f"unknown label rule kind {self.kind!r}")


def parse_label_rule(spec: str) -> LabelRule:
    spec = spec.strip()
    if spec == "identity":
        return LabelRule("identity")
    if spec == "minus-plus":
        return LabelRule("minus-plus")
    if spec.startswith("pair:"):
        try:
            neg, pos = (float(v) for v in spec[len("pair:"):].split(","))
        except ValueError:
            raise ConfigurationError(f"label_rule {spec!r}: expected 'pair:a,b'") from None
        if neg == pos:
            raise ConfigurationError(f"label_rule {spec!r}: classes must differ")
        return LabelRule("pair", (neg, pos))
    if spec.startswith("range:"):
        try:
            split = float(spec[len("range:"):])
        except ValueError:
            raise ConfigurationError(f"label_rule {spec!r}: expected 'range:k'") from None
        return LabelRule("range", (split,))
    raise ConfigurationError(
        f"unknown label_rule {spec!r}; expected identity, minus-plus, pair:a,b or range:k"
    )


# ---------------------------------------------------------------------------
# file readers
# ---------------------------------------------------------------------------

def _looks_like_header(cells: list[str]) -> bool:
    for cell in cells:
        try:
            float(cell)
            return False
        except ValueError:
            continue
    return True


def _read_csv(path: Path, label_column) -> tuple[np.ndarray, np.ndarray, list[str] | None]:
    rows: list[list[float]] = []
    header: list[str] | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        width = None
        for lineno, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if lineno == 1 and _looks_like_header(cells):
                header = [c.strip() for c in cells]
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(
                    f"{path}: row {lineno} has {len(cells)} fields, expected {width}"
                )
            try:
                row = [float(c) for c in cells]
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}") from None
            if not all(np.isfinite(row)):
                raise DataError(f"{path}: row {lineno} contains a non-finite value")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")

    data = np.asarray(rows, dtype=np.float64)
    if label_column is None:
        label_idx = data.shape[1] - 1
    elif isinstance(label_column, int):
        label_idx = label_column
    else:
        if header is None:
            raise DataError(f"{path}: label_column {label_column!r} needs a header row")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(f"{path}: no column named {label_column!r} in header") from None
    if not 0 <= label_idx < data.shape[1]:
        raise DataError(f"{path}: label column index {label_idx} out of range")

    y = data[:, label_idx]
    X = np.delete(data, label_idx, axis=1)
    names = None
    if header is not None:
        names = [h for i, h in enumerate(header) if i != label_idx]
    return X, y, names


def _read_svmlight(path: Path) -> tuple[list[dict[int, float]], np.ndarray, int]:
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise DataError(f"{path}: row {lineno}: bad label {tokens[0]!r}") from None
            entries: dict[int, float] = {}
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataError(f"{path}: row {lineno}: bad feature token {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{path}: row {lineno}: indices are 1-based, got {idx}")
                if not np.isfinite(val):
                    raise DataError(f"{path}: row {lineno}: non-finite value in {tok!r}")
                entries[idx - 1] = val
            rows.append(entries)
            max_idx = max(max_idx, max(entries, default=-1) + 1)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows, np.asarray(labels), max_idx


def _densify(rows: list[dict[int, float]], n_features: int) -> np.ndarray:
    X = np.zeros((len(rows), n_features))
    for i, entries in enumerate(rows):
        for j, v in entries.items():
            X[i, j] = v
    return X


def load_dataset(
    train_path,
    test_path,
    format: str = "csv",
    label_rule: str | LabelRule = "identity",
    label_column=None,
) -> Dataset:
    """Read a train/test pair from disk and binarize the labels."""
    train_path, test_path = Path(train_path), Path(test_path)
    for p in (train_path, test_path):
        if not p.is_file():
            raise DataError(f"dataset file not found: {p}")
    rule = parse_label_rule(label_rule) if isinstance(label_rule, str) else label_rule

    if format == "csv":
        X_train, raw_train, names = _read_csv(train_path, label_column)
        X_test, raw_test, _ = _read_csv(test_path, label_column)
        if X_train.shape[1] != X_test.shape[1]:
            raise DataError(
                f"{test_path}: test has {X_test.shape[1]} features, train has {X_train.shape[1]}"
            )
    elif format == "svmlight":
        rows_tr, raw_train, n_tr = _read_svmlight(train_path)
        rows_te, raw_test, n_te = _read_svmlight(test_path)
        n_features = max(n_tr, n_te)
        X_train = _densify(rows_tr, n_features)
        X_test = _densify(rows_te, n_features)
        names = None
    else:
        raise ConfigurationError(f"unknown dataset format {format!r}; expected csv or svmlight")

    keep_tr, y_train = rule.apply(raw_train)
    keep_te, y_test = rule.apply(raw_test)
    return Dataset(
        X_train=X_train[keep_tr],
        y_train=y_train,
        X_test=X_test[keep_te],
        y_test=y_test,
        feature_names=names,
    )


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

SCALING_METHODS = ("minmax01", "zscore", "none")


def scale_features(ds: Dataset, method: str = "minmax01") -> Dataset:
    """Rescale features using statistics computed on the train split only.

    Constant columns map to 0.  Test values outside the train range are kept
    as-is (minmax01 output may fall outside [0, 1]).
    """
    if method not in SCALING_METHODS:
        raise ConfigurationError(
            f"unknown scaling method {method!r}; expected one of {SCALING_METHODS}"
        )
    if method == "none":
        return ds
    if method == "minmax01":
        lo = ds.X_train.min(axis=0)
        hi = ds.X_train.max(axis=0)
        span = hi - lo
        span[span == 0.0] = 1.0  # constant columns -> 0 after shift
        transform = lambda X: (X - lo) / span
    else:  # zscore
        mean = ds.X_train.mean(axis=0)
        std = ds.X_train.std(axis=0)
        std[std == 0.0] = 1.0
        transform = lambda X: (X - mean) / std
    return Dataset(
        X_train=transform(ds.X_train),
        y_train=ds.y_train.copy(),
        X_test=transform(ds.X_test),
        y_test=ds.y_test.copy(),
        feature_names=ds.feature_names,
    )
