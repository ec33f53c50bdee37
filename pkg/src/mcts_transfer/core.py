"""Domain types shared by every other module.

Everything downstream works in unit-cube coordinates with larger-is-better
objectives; the helpers here convert to and from the original problem scale.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

SOURCE = "source"
TARGET = "target"


class DatasetError(ValueError):
    """Raised for structurally corrupt datasets (ragged rows, bad headers)."""


@dataclass(frozen=True)
class SearchDomain:
    """Axis-aligned box ``[lower, upper]`` in the original coordinates."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise ValueError("lower and upper must be non-empty vectors of equal length")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("bounds must be finite")
        if np.any(lower >= upper):
            raise ValueError("lower[d] < upper[d] must hold for every dimension")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, dim: int, low: float, high: float) -> "SearchDomain":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        return {"dim": self.dim, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _check_dim(x: np.ndarray, domain: SearchDomain) -> None:
    if x.shape[-1] != domain.dim:
        raise ValueError(f"dimension mismatch: got {x.shape[-1]}, domain has {domain.dim}")


def normalize_point(x_orig, domain: SearchDomain) -> np.ndarray:
    """Map original coordinates into ``[0, 1]^dim``, clamping outliers.

    Accepts a single point or a ``(n, dim)`` array.
    """
    x = np.asarray(x_orig, dtype=float)
    _check_dim(x, domain)
    if not np.all(np.isfinite(x)):
        raise ValueError("point contains non-finite values")
    return np.clip((x - domain.lower) / domain.width, 0.0, 1.0)


def denormalize_point(x_unit, domain: SearchDomain) -> np.ndarray:
    x = np.asarray(x_unit, dtype=float)
    _check_dim(x, domain)
    return domain.lower + np.clip(x, 0.0, 1.0) * domain.width


def minmax_normalize(y: Sequence[float]) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant vector maps to 0.5."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return y.copy()
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi == lo:
        return np.full_like(y, 0.5)
    return (y - lo) / (hi - lo)


@dataclass
class Sample:
    x: np.ndarray
    y_raw: float
    y_norm: float = 0.5


@dataclass
class TaskDataset:
    """Evaluated samples of one task.

    ``X`` holds unit-cube coordinates, ``y`` the raw objective in the
    maximisation sense.  ``y_norm`` is refreshed by
    :func:`normalize_objectives` or by :meth:`append`.
    """

    task_id: str
    X: np.ndarray
    y: np.ndarray
    role: str = SOURCE
    y_norm: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(len(y), -1) if len(y) else X.reshape(0, 0)
        if X.shape[0] != y.shape[0]:
            raise DatasetError("X and y have different numbers of rows")
        self.X, self.y = X, y
        if self.role not in (SOURCE, TARGET):
            raise ValueError(f"role must be {SOURCE!r} or {TARGET!r}")
        if self.y_norm is None or len(self.y_norm) != len(y):
            self.y_norm = minmax_normalize(y)

    @classmethod
    def empty(cls, task_id: str, dim: int, role: str = TARGET) -> "TaskDataset":
        return cls(task_id, np.zeros((0, dim)), np.zeros(0), role=role)

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    @property
    def y_min_raw(self) -> float:
        return float(np.min(self.y)) if len(self) else math.nan

    @property
    def y_max_raw(self) -> float:
        return float(np.max(self.y)) if len(self) else math.nan

    @property
    def samples(self) -> List[Sample]:
        return [Sample(self.X[i].copy(), float(self.y[i]), float(self.y_norm[i])) for i in range(len(self))]

    def append(self, x, y: float) -> None:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if len(self) and x.shape[1] != self.dim:
            raise ValueError("dimension mismatch on append")
        self.X = np.vstack([self.X.reshape(-1, x.shape[1]), x])
        self.y = np.append(self.y, float(y))
        self.y_norm = minmax_normalize(self.y)

    def best_index(self) -> int:
        # argmax returns the first occurrence, i.e. ties go to insertion order
        return int(np.argmax(self.y))


def normalize_objectives(dataset: TaskDataset) -> TaskDataset:
    if len(dataset) == 0:
        raise ValueError("cannot normalise an empty dataset")
    dataset.y_norm = minmax_normalize(dataset.y)
    return dataset


@dataclass
class ValidationReport:
    nan_records: List[int] = field(default_factory=list)
    out_of_bounds: List[int] = field(default_factory=list)
    duplicates: List[int] = field(default_factory=list)
    dim_mismatch: Optional[str] = None
    clamp_suggestions: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not (self.nan_records or self.out_of_bounds or self.duplicates or self.dim_mismatch)

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if self.dim_mismatch:
            parts.append(self.dim_mismatch)
        if self.nan_records:
            parts.append(f"non-finite values in records {self.nan_records}")
        if self.out_of_bounds:
            parts.append(f"out-of-bound records {self.out_of_bounds} (clamp to domain)")
        if self.duplicates:
            parts.append(f"duplicate points at records {self.duplicates}")
        return "; ".join(parts)


def validate_records(X, y, domain: SearchDomain) -> ValidationReport:
    """Check raw records given in ORIGINAL coordinates.

    Ragged rows raise :class:`DatasetError`; everything else is reported.
    """
    rows = list(X)
    lengths = {len(r) for r in rows}
    if len(lengths) > 1:
        raise DatasetError(f"ragged rows: lengths {sorted(lengths)}")
    if len(rows) != len(y):
        raise DatasetError("number of points and objective values differ")
    report = ValidationReport()
    if not rows:
        return report
    X = np.asarray(rows, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[1] != domain.dim:
        report.dim_mismatch = f"points have dimension {X.shape[1]}, domain has {domain.dim}"
        return report
    finite = np.all(np.isfinite(X), axis=1) & np.isfinite(y)
    report.nan_records = [int(i) for i in np.flatnonzero(~finite)]
    outside = np.any((X < domain.lower) | (X > domain.upper), axis=1) & finite
    report.out_of_bounds = [int(i) for i in np.flatnonzero(outside)]
    for i in report.out_of_bounds:
        report.clamp_suggestions[i] = np.clip(X[i], domain.lower, domain.upper).tolist()
    seen = {}
    for i, row in enumerate(map(tuple, X)):
        if row in seen:
            report.duplicates.append(i)
        else:
            seen[row] = i
    return report


def validate_dataset(dataset: TaskDataset, domain: SearchDomain) -> ValidationReport:
    """Validate a normalised dataset against ``domain``."""
    if len(dataset) and dataset.dim != domain.dim:
        report = ValidationReport()
        report.dim_mismatch = f"points have dimension {dataset.dim}, domain has {domain.dim}"
        return report
    X = denormalize_point(dataset.X, domain) if len(dataset) else dataset.X
    report = validate_records(X, dataset.y, domain)
    # normalised data that left the unit cube is also out of bounds
    if len(dataset):
        bad = np.any((dataset.X < 0) | (dataset.X > 1), axis=1)
        extra = [int(i) for i in np.flatnonzero(bad) if int(i) not in report.out_of_bounds]
        report.out_of_bounds.extend(extra)
    return report


# --- file format -----------------------------------------------------------


def write_dataset(path, dataset: TaskDataset, domain: SearchDomain) -> Path:
    """Write line-delimited JSON: a header line then one record per sample."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    X = denormalize_point(dataset.X, domain) if len(dataset) else dataset.X
    with open(path, "w") as fh:
        header = {"task_id": dataset.task_id, **domain.to_dict()}
        fh.write(json.dumps(header) + "\n")
        for xi, yi in zip(X, dataset.y):
            fh.write(json.dumps({"x": [float(v) for v in xi], "y": float(yi)}) + "\n")
    return path


def _read_jsonl(path: Path):
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    header = json.loads(lines[0])
    for key in ("task_id", "dim", "lower", "upper"):
        if key not in header:
            raise DatasetError(f"{path}: header lacks {key!r}")
    domain = SearchDomain(header["lower"], header["upper"])
    if domain.dim != int(header["dim"]):
        raise DatasetError(f"{path}: header dim disagrees with bounds")
    X, y = [], []
    for n, line in enumerate(lines[1:], start=1):
        rec = json.loads(line)
        if "x" not in rec or "y" not in rec:
            raise DatasetError(f"{path}: record {n} lacks x or y")
        X.append(list(rec["x"]))
        y.append(float(rec["y"]) if rec["y"] is not None else math.nan)
    return str(header["task_id"]), domain, X, y


def _read_csv(path: Path, domain: Optional[SearchDomain]):
    if domain is None:
        raise DatasetError("CSV datasets need an explicit domain")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    xcols = [f"x_{d}" for d in range(domain.dim)]
    X, y = [], []
    for n, row in enumerate(rows):
        missing = [c for c in xcols + ["y"] if row.get(c) in (None, "")]
        if missing:
            raise DatasetError(f"{path}: row {n} missing columns {missing}")
        X.append([float(row[c]) for c in xcols])
        y.append(float(row["y"]))
    return path.stem, domain, X, y


def load_dataset(path, domain: Optional[SearchDomain] = None, role: str = SOURCE):
    """Load a dataset file; returns ``(TaskDataset, SearchDomain, report)``.

    Records in the file are in original coordinates; the returned dataset is
    normalised to the unit cube.  Non-finite records are dropped (they are
    listed in the report).
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        task_id, dom, X, y = _read_csv(path, domain)
    else:
        task_id, dom, X, y = _read_jsonl(path)
        if domain is not None and (dom.dim != domain.dim):
            raise DatasetError(f"{path}: dimension {dom.dim} does not match domain {domain.dim}")
    report = validate_records(X, y, dom)
    if report.dim_mismatch:
        raise DatasetError(report.dim_mismatch)
    Xa = np.asarray(X, dtype=float).reshape(len(y), dom.dim)
    ya = np.asarray(y, dtype=float)
    keep = np.ones(len(ya), dtype=bool)
    keep[report.nan_records] = False
    ds = TaskDataset(task_id, normalize_point(Xa[keep], dom) if keep.any() else np.zeros((0, dom.dim)),
                     ya[keep], role=role)
    return ds, dom, report


def stack_datasets(datasets: Iterable[TaskDataset], normalized: bool = True):
    """Concatenate datasets into ``(X, y, task_index)`` arrays.

    ``y`` is the per-task normalised objective unless ``normalized`` is False.
    """
    datasets = list(datasets)
    if not datasets:
        return np.zeros((0, 0)), np.zeros(0), np.zeros(0, dtype=int)
    X = np.vstack([d.X for d in datasets])
    y = np.concatenate([d.y_norm if normalized else d.y for d in datasets])
    idx = np.concatenate([np.full(len(d), i, dtype=int) for i, d in enumerate(datasets)])
    return X, y, idx
