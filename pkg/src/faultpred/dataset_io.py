"""Loading, validation and min-max normalization of class-level metric tables."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

METRICS: tuple[str, ...] = (
    "DIT", "WMC", "RFC", "CBO", "LCOM", "NOC", "Ce", "Ca", "LCOM3", "NPM",
    "DAM", "MOA", "LOC", "CAM", "MFA", "CBM", "AVG-CC", "MAX-CC", "AMC", "IC",
)

LABEL_COLUMNS = ("bug", "fault")

# project -> (classes, faulty classes, faulty %), reference counts for the 45 PROMISE projects
PROMISE_REFERENCE_COUNTS: dict[str, tuple[int, int, float]] = {
    "ant-1.3": (125, 20, 16.0),
    "ant-1.4": (178, 40, 22.47),
    "ant-1.5": (293, 32, 10.92),
    "ant-1.6": (351, 92, 26.21),
    "ant-1.7": (745, 166, 22.28),
    "arc": (234, 27, 11.54),
    "berek": (43, 16, 37.21),
    "camel-1.0": (339, 13, 3.83),
    "camel-1.2": (608, 216, 35.53),
    "camel-1.4": (872, 145, 16.63),
    "camel-1.6": (965, 188, 19.48),
    "e-learning": (64, 5, 7.81),
    "ivy-1.1": (111, 63, 56.76),
    "ivy-1.4": (241, 16, 6.64),
    "ivy-2.0": (352, 40, 11.36),
    "jedit-3.2": (272, 90, 33.09),
    "jedit-4.0": (306, 75, 24.51),
    "jedit-4.1": (312, 79, 25.32),
    "jedit-4.2": (367, 48, 13.08),
    "kalkulator": (27, 6, 22.22),
    "log4j-1.0": (135, 34, 25.19),
    "log4j-1.1": (109, 37, 33.94),
    "log4j-1.2": (205, 189, 92.2),
    "lucene-2.0": (195, 91, 46.67),
    "lucene-2.2": (247, 144, 58.3),
    "lucene-2.4": (340, 203, 59.71),
    "pdftranslator": (33, 15, 45.45),
    "prop-1": (18471, 2738, 14.82),
    "prop-2": (23014, 2431, 10.56),
    "prop-3": (10274, 1180, 11.49),
    "prop-4": (8718, 840, 9.64),
    "prop-5": (8516, 1299, 15.25),
    "prop-6": (660, 66, 10.0),
    "redaktor": (176, 27, 15.34),
    "serapion": (45, 9, 20.0),
    "synapse-1.0": (157, 16, 10.19),
    "synapse-1.1": (222, 60, 27.03),
    "synapse-1.2": (256, 86, 33.59),
    "termoproject": (42, 13, 30.95),
    "velocity-1.5": (214, 142, 66.36),
    "velocity-1.6": (229, 78, 34.06),
    "xerces-1.2": (440, 71, 16.14),
    "xerces-1.3": (453, 69, 15.23),
    "xerces-1.4": (588, 437, 74.32),
    "xerces-init": (162, 77, 47.53),
}

LARGE_PROJECTS = frozenset({"prop-1", "prop-2", "prop-3", "prop-4", "prop-5"})


class DatasetError(ValueError):
    """Base class for dataset loading problems."""


class SchemaError(DatasetError):
    pass


class ParseError(DatasetError):
    pass


class DegenerateDatasetError(DatasetError):
    pass


def _key(name: str) -> str:
    return name.strip().lower().replace("-", "_")


@dataclass(frozen=True)
class MetricRecord:
    class_id: str
    values: tuple[float, ...]
    label: int


@dataclass(frozen=True)
class Dataset:
    """A project's metric table.

    ``X`` is an ``(n, len(metrics))`` float array aligned with ``metrics``;
    ``y`` holds 0/1 labels. Arrays are made read-only on construction.
    """

    name: str
    X: np.ndarray
    y: np.ndarray
    class_ids: tuple[str, ...]
    metrics: tuple[str, ...] = METRICS
    normalized: bool = False
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int)
        if X.ndim != 2 or X.shape[1] != len(self.metrics):
            raise SchemaError(f"{self.name}: expected {len(self.metrics)} metric columns, got shape {X.shape}")
        if y.shape != (X.shape[0],) or len(self.class_ids) != X.shape[0]:
            raise SchemaError(f"{self.name}: labels/ids do not align with {X.shape[0]} records")
        if X.shape[0] < 2:
            raise DegenerateDatasetError(f"{self.name}: at least 2 records required")
        if not np.all(np.isfinite(X)):
            raise ParseError(f"{self.name}: non-finite metric value")
        if not np.all((y == 0) | (y == 1)):
            raise SchemaError(f"{self.name}: labels must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_ids", tuple(self.class_ids))
        object.__setattr__(self, "metrics", tuple(self.metrics))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_faulty(self) -> int:
        return int(self.y.sum())

    @property
    def faulty_percent(self) -> float:
        return 100.0 * self.n_faulty / len(self)

    @property
    def records(self) -> Iterator[MetricRecord]:
        for cid, row, label in zip(self.class_ids, self.X, self.y):
            yield MetricRecord(cid, tuple(float(v) for v in row), int(label))

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.metrics.index(n) for n in names]
        return self.X[:, idx]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            self.name,
            self.X[rows],
            self.y[rows],
            tuple(self.class_ids[i] for i in rows),
            self.metrics,
            self.normalized,
            self.warnings,
        )


@dataclass(frozen=True)
class DatasetSummary:
    n_classes: int
    n_faulty: int
    faulty_percent: float


def load_dataset(path: str | Path, format: str = "csv") -> Dataset:
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = list(reader)

    keys = {_key(h): i for i, h in enumerate(header)}
    cols = []
    for m in METRICS:
        if _key(m) not in keys:
            raise SchemaError(f"{path.name}: missing metric column {m!r}")
        cols.append(keys[_key(m)])
    label_col = next((keys[c] for c in LABEL_COLUMNS if c in keys), None)
    if label_col is None:
        raise SchemaError(f"{path.name}: missing label column (one of {', '.join(LABEL_COLUMNS)})")
    id_col = keys.get("name", keys.get("class", None))

    X = np.empty((len(rows), len(METRICS)))
    y = np.empty(len(rows), dtype=int)
    ids = []
    for r, row in enumerate(rows):
        if not row or all(not c.strip() for c in row):
            raise ParseError(f"{path.name}: blank row at index {r}")
        for j, c in enumerate(cols):
            X[r, j] = _parse_cell(row, c, r, path.name, header[c])
        bugs = _parse_cell(row, label_col, r, path.name, header[label_col])
        if bugs < 0:
            raise ParseError(f"{path.name}: negative bug count at row {r}")
        y[r] = 1 if bugs > 0 else 0
        ids.append(row[id_col].strip() if id_col is not None and id_col < len(row) else str(r))

    if len(rows) < 2:
        raise DegenerateDatasetError(f"{path.name}: at least 2 records required")
    if y.min() == y.max():
        raise DegenerateDatasetError(f"{path.name}: all records have label {y[0]}")
    return Dataset(path.stem, X, y, tuple(ids))


def _parse_cell(row: list[str], col: int, r: int, fname: str, colname: str) -> float:
    try:
        v = float(row[col])
    except (IndexError, ValueError):
        cell = row[col] if col < len(row) else ""
        raise ParseError(f"{fname}: row {r}, column {colname!r}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"{fname}: row {r}, column {colname!r}: non-finite value")
    return v


def load_directory(
    data_dir: str | Path,
    names: Sequence[str] | None = None,
    include_large: bool = False,
) -> list[Dataset]:
    """Load every ``*.csv`` in ``data_dir`` sorted by stem."""
    paths = sorted(Path(data_dir).glob("*.csv"))
    out = []
    for p in paths:
        if names and p.stem not in names:
            continue
        if not include_large and p.stem in LARGE_PROJECTS:
            continue
        out.append(load_dataset(p))
    return out


def minmax_params(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return X.min(axis=0), X.max(axis=0)


def apply_minmax(X: np.ndarray, lo: np.ndarray, hi: np.ndarray, clamp: bool = False) -> np.ndarray:
    span = hi - lo
    const = span == 0
    out = (X - lo) / np.where(const, 1.0, span)
    out[:, const] = 0.0
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def normalize(d: Dataset) -> Dataset:
    if d.normalized:
        raise ValueError(f"{d.name} is already normalized")
    lo, hi = minmax_params(d.X)
    warnings = list(d.warnings)
    for m, a, b in zip(d.metrics, lo, hi):
        if a == b:
            msg = f"{d.name}: constant column {m} mapped to 0.0"
            log.warning(msg)
            warnings.append(msg)
    return Dataset(d.name, apply_minmax(d.X, lo, hi), d.y, d.class_ids, d.metrics, True, tuple(warnings))


def dataset_summary(d: Dataset) -> DatasetSummary:
    return DatasetSummary(len(d), d.n_faulty, round(d.faulty_percent, 2))
