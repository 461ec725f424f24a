"""Dataset loading (CSV, numeric ARFF), standardization and k-fold splits."""

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import STREAM_FOLDS, derive_rng
from .exceptions import DataError, InvalidArgument


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    feature_names: list = field(default_factory=list)
    task_names: list = field(default_factory=list)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] != Y.shape[0]:
            raise InvalidArgument(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        if X.shape[0] < 2:
            raise InvalidArgument("a dataset needs at least two observations")
        if Y.shape[1] < 1:
            raise InvalidArgument("a dataset needs at least one task")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidArgument("dataset contains NaN or Inf")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", [f"x{i}" for i in range(X.shape[1])])
        if not self.task_names:
            object.__setattr__(self, "task_names", [f"y{i}" for i in range(Y.shape[1])])

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_inputs(self):
        return self.X.shape[1]

    @property
    def n_tasks(self):
        return self.Y.shape[1]

    def take(self, idx):
        return Dataset(self.X[idx], self.Y[idx], list(self.feature_names), list(self.task_names))


def _split(names, body, n_targets, source):
    n_cols = len(names)
    if not 1 <= n_targets < n_cols:
        raise DataError(f"{source}: cannot take {n_targets} targets from {n_cols} columns")
    try:
        return Dataset(body[:, :-n_targets], body[:, -n_targets:],
                       list(names[:-n_targets]), list(names[-n_targets:]))
    except InvalidArgument as exc:
        raise DataError(f"{source}: {exc}") from exc


def _parse_number(text, line, col, source):
    try:
        value = float(text)
    except ValueError:
        value = math.nan
    if not math.isfinite(value):
        raise DataError(f"{source}: line {line}, column {col}: non-numeric cell {text!r}")
    return value


def read_csv_table(path):
    """Header names and an (N, columns) float array from a CSV file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    rows = []
    for line_no, record in enumerate(reader, start=2):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise DataError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(record)}")
        rows.append([_parse_number(c.strip(), line_no, j + 1, path) for j, c in enumerate(record)])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=float).reshape(-1, len(header))


def load_csv(path, n_targets):
    """Read a comma-separated file with a header; the last ``n_targets``
    columns become the targets."""
    names, body = read_csv_table(path)
    return _split(names, body, int(n_targets), path)


_ATTR = re.compile(r"^@attribute\s+('[^']*'|\"[^\"]*\"|\S+)\s+(.+)$", re.IGNORECASE)
_NUMERIC_TYPES = {"numeric", "real", "integer"}


def read_arff_table(path):
    """Attribute names and an (N, attributes) float array from a dense ARFF file.

    ``%`` comments and case-insensitive keywords are accepted; nominal, string
    and date attributes, and sparse ``{...}`` rows, are rejected.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8", errors="replace").splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    names, rows, in_data = [], [], False
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            low = line.lower()
            if low.startswith("@relation"):
                continue
            if low.startswith("@attribute"):
                m = _ATTR.match(line)
                if not m:
                    raise DataError(f"{path}: line {line_no}: malformed @attribute")
                name, kind = m.group(1).strip("'\""), m.group(2).strip()
                if kind.lower() not in _NUMERIC_TYPES:
                    raise DataError(f"{path}: line {line_no}: attribute {name!r} has "
                                    f"unsupported type {kind!r} (numeric only)")
                names.append(name)
                continue
            if low.startswith("@data"):
                in_data = True
                continue
            raise DataError(f"{path}: line {line_no}: unexpected header line {line!r}")
        if line.startswith("{"):
            raise DataError(f"{path}: line {line_no}: sparse ARFF rows are unsupported")
        cells = next(csv.reader([line], skipinitialspace=True))
        if len(cells) != len(names):
            raise DataError(f"{path}: line {line_no}: expected {len(names)} values, got {len(cells)}")
        rows.append([_parse_number(c.strip(), line_no, j + 1, path) for j, c in enumerate(cells)])
    if not names:
        raise DataError(f"{path}: no @attribute declarations")
    if not rows:
        raise DataError(f"{path}: no @data rows")
    return names, np.asarray(rows, dtype=float).reshape(-1, len(names))


def load_arff(path, n_targets):
    """Read a dense numeric ARFF file; the last ``n_targets`` attributes are targets."""
    names, body = read_arff_table(path)
    return _split(names, body, int(n_targets), path)


def read_table(path, fmt=None):
    """Dispatch on ``fmt`` ('csv' or 'arff'), or on the file suffix."""
    fmt = (fmt or Path(path).suffix.lstrip(".")).lower()
    if fmt == "csv":
        return read_csv_table(path)
    if fmt == "arff":
        return read_arff_table(path)
    raise DataError(f"{path}: unknown dataset format {fmt!r}")


def load_dataset(path, n_targets, fmt=None):
    """Read a CSV or ARFF file (see :func:`read_table`) and split off the targets."""
    names, body = read_table(path, fmt)
    return _split(names, body, int(n_targets), path)


@dataclass
class Standardizer:
    """Per-column affine maps fitted on training data only.

    Columns with zero variance get scale 1 and are flagged.
    """

    input_mean: np.ndarray
    input_scale: np.ndarray
    target_mean: np.ndarray
    target_scale: np.ndarray
    input_degenerate: np.ndarray
    target_degenerate: np.ndarray

    @classmethod
    def identity(cls, D, C):
        return cls(np.zeros(D), np.ones(D), np.zeros(C), np.ones(C),
                   np.zeros(D, bool), np.zeros(C, bool))

    def transform_inputs(self, X):
        return (np.asarray(X, dtype=float) - self.input_mean) / self.input_scale

    def transform_targets(self, Y):
        return (np.asarray(Y, dtype=float) - self.target_mean) / self.target_scale

    def invert_targets(self, Z):
        return np.asarray(Z, dtype=float) * self.target_scale + self.target_mean

    def apply(self, data):
        return Dataset(self.transform_inputs(data.X), self.transform_targets(data.Y),
                       list(data.feature_names), list(data.task_names))


def _column_stats(A):
    mean = A.mean(axis=0)
    sd = A.std(axis=0)
    degenerate = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    return mean, np.where(degenerate, 1.0, sd), degenerate


def fit_standardizer(train, inputs=True, targets=True):
    """Fit column means and (population) standard deviations on ``train``."""
    if train.n_samples < 2:
        raise InvalidArgument("standardization needs at least two rows")
    st = Standardizer.identity(train.n_inputs, train.n_tasks)
    if inputs:
        st.input_mean, st.input_scale, st.input_degenerate = _column_stats(train.X)
    if targets:
        st.target_mean, st.target_scale, st.target_degenerate = _column_stats(train.Y)
    return st


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def folds(self):
        """Yield ``(fold, train_idx, test_idx)`` in fold order."""
        for f in range(self.k):
            test = np.flatnonzero(self.assignments == f)
            train = np.flatnonzero(self.assignments != f)
            yield f, train, test

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def kfold(N, k, seed):
    """Shuffled partition of ``range(N)`` into ``k`` folds whose sizes differ by <= 1."""
    N, k = int(N), int(k)
    if not 2 <= k <= N:
        raise InvalidArgument(f"fold count k={k} must satisfy 2 <= k <= N={N}")
    perm = derive_rng(seed, STREAM_FOLDS).permutation(N)
    assignments = np.empty(N, dtype=np.int64)
    assignments[perm] = np.arange(N) % k
    return FoldPlan(k, assignments, int(seed))
