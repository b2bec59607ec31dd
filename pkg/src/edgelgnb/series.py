"""Time-series containers and the preprocessing stack.

Covers down-sampling, min-max scaling, imputation of missing values, PCA
and sample autocorrelation, plus the ``timestamp,value`` CSV format.
Missing samples are always carried as an explicit boolean mask
(``True`` = present); the numeric slot under a missing entry is ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

DEFAULT_INTERVAL = 900.0  # seconds, 15-minute meter readings

_AGGREGATORS = {
    "mean": lambda b: b.mean(axis=1),
    "max": lambda b: b.max(axis=1),
    "min": lambda b: b.min(axis=1),
    "first": lambda b: b[:, 0],
}


class MissingValueError(ValueError):
    """Raised when an operation requires complete data but finds gaps."""


@dataclass(frozen=True)
class TimeSeries:
    """Regularly sampled scalar stream.

    Sample ``i`` sits at ``start_time + i * interval`` seconds.
    """

    start_time: datetime
    interval: float
    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.mask is None:
            mask = np.ones(values.shape, dtype=bool)
        else:
            mask = np.asarray(self.mask, dtype=bool).ravel()
        if mask.shape != values.shape:
            raise ValueError("mask and values must have the same length")
        if not self.interval > 0:
            raise ValueError(f"interval must be positive, got {self.interval}")
        values = np.where(mask, values, 0.0)
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def __len__(self):
        return self.values.shape[0]

    @property
    def complete(self) -> bool:
        return bool(self.mask.all())

    def timestamps(self) -> list[datetime]:
        step = timedelta(seconds=self.interval)
        return [self.start_time + i * step for i in range(len(self))]

    def present_values(self) -> np.ndarray:
        if not self.complete:
            raise MissingValueError("series has missing samples; impute first")
        return self.values


@dataclass(frozen=True)
class FeatureMatrix:
    """Samples-by-features matrix with a presence mask of the same shape."""

    data: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, ndmin=2)
        if data.ndim != 2:
            raise ValueError("FeatureMatrix data must be two-dimensional")
        if self.mask is None:
            mask = np.ones(data.shape, dtype=bool)
        else:
            mask = np.array(self.mask, dtype=bool, ndmin=2)
        if mask.shape != data.shape:
            raise ValueError("mask shape must match data shape")
        data = np.where(mask, data, 0.0)
        data.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_nan(cls, array) -> "FeatureMatrix":
        """Build from an array where NaN marks a missing entry."""
        array = np.array(array, dtype=np.float64, ndmin=2)
        return cls(np.nan_to_num(array), ~np.isnan(array))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def complete(self) -> bool:
        return bool(self.mask.all())

    def require_complete(self):
        if not self.complete:
            r, c = np.argwhere(~self.mask)[0]
            raise MissingValueError(
                f"missing value at row {r}, column {c}; impute first")
        return self.data


@dataclass(frozen=True)
class ScaleParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64).ravel()
        hi = np.asarray(self.maximum, dtype=np.float64).ravel()
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("ScaleParams needs min <= max per column")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    def to_dict(self) -> dict:
        return {"min": [float(v) for v in self.minimum],
                "max": [float(v) for v in self.maximum]}

    @classmethod
    def from_dict(cls, d) -> "ScaleParams":
        return cls(np.array(d["min"], dtype=float), np.array(d["max"], dtype=float))


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, cols), rows orthonormal
    explained_variance: np.ndarray
    total_variance: float = field(default=0.0)

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance


# --------------------------------------------------------------------------
# down-sampling
# --------------------------------------------------------------------------

def downsample(series: TimeSeries, factor: int, aggregator: str = "mean") -> TimeSeries:
    """Aggregate disjoint blocks of ``factor`` samples.

    The trailing partial block is dropped. A block containing a missing
    sample yields a missing output sample.
    """
    if len(series) == 0:
        raise ValueError("cannot downsample an empty series")
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    if aggregator not in _AGGREGATORS:
        raise ValueError(f"unknown aggregator {aggregator!r}")
    factor = int(factor)
    n_out = len(series) // factor
    blocks = series.values[: n_out * factor].reshape(n_out, factor)
    present = series.mask[: n_out * factor].reshape(n_out, factor).all(axis=1)
    if n_out:
        out = _AGGREGATORS[aggregator](blocks)
    else:
        out = np.zeros(0)
    return TimeSeries(series.start_time, series.interval * factor, out, present)


# --------------------------------------------------------------------------
# min-max scaling
# --------------------------------------------------------------------------

def minmax_fit(m: FeatureMatrix) -> ScaleParams:
    data = m.require_complete()
    return ScaleParams(data.min(axis=0), data.max(axis=0))


def minmax_transform(m: FeatureMatrix, params: ScaleParams) -> FeatureMatrix:
    """Map each column affinely with ``params``; constant columns go to 0."""
    data = m.require_complete()
    if data.shape[1] != params.minimum.shape[0]:
        raise ValueError("column count does not match ScaleParams")
    span = params.maximum - params.minimum
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (data - params.minimum) / safe, 0.0)
    return FeatureMatrix(out)


def minmax_fit_transform(m: FeatureMatrix) -> tuple[FeatureMatrix, ScaleParams]:
    params = minmax_fit(m)
    return minmax_transform(m, params), params


def inverse_transform(m: FeatureMatrix, params: ScaleParams) -> FeatureMatrix:
    data = m.require_complete()
    span = params.maximum - params.minimum
    return FeatureMatrix(data * span + params.minimum)


# --------------------------------------------------------------------------
# imputation
# --------------------------------------------------------------------------

def _column_mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    # ties resolve to the smallest value
    return float(uniq[np.argmax(counts)])


def impute(m: FeatureMatrix, strategy: str = "mean") -> FeatureMatrix:
    """Fill missing entries with a per-column statistic of present values."""
    stats = {"mean": np.mean, "median": np.median, "mode": _column_mode}
    if strategy not in stats:
        raise ValueError(f"unknown imputation strategy {strategy!r}")
    out = m.data.copy()
    for j in range(m.cols):
        present = m.mask[:, j]
        if present.all():
            continue
        if not present.any():
            raise MissingValueError(f"column {j} has no present values to impute from")
        out[~present, j] = stats[strategy](m.data[present, j])
    return FeatureMatrix(out)


# --------------------------------------------------------------------------
# PCA
# --------------------------------------------------------------------------

def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its first nonzero coordinate is positive."""
    out = vectors.copy()
    for i, v in enumerate(out):
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            out[i] = -v
    return out


def pca_fit(m: FeatureMatrix, k: int) -> PcaModel:
    """Top-``k`` principal directions of the column-centred sample covariance."""
    data = m.require_complete()
    rows, cols = data.shape
    if k < 1 or k > cols:
        raise ValueError(f"k must be in [1, {cols}], got {k}")
    if rows < 2:
        raise ValueError("PCA needs at least two rows")
    mean = data.mean(axis=0)
    centred = data - mean
    cov = centred.T @ centred / (rows - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    components = _orient(evecs[:, order].T)
    explained = np.clip(evals[order], 0.0, None)
    return PcaModel(mean, components, explained, float(np.trace(cov)))


def pca_project(model: PcaModel, m: FeatureMatrix) -> FeatureMatrix:
    data = m.require_complete()
    if data.shape[1] != model.mean.shape[0]:
        raise ValueError("column count does not match the PCA model")
    return FeatureMatrix((data - model.mean) @ model.components.T)


# --------------------------------------------------------------------------
# autocorrelation
# --------------------------------------------------------------------------

def autocorr(series, lag: int) -> float:
    """Biased sample autocorrelation at ``lag``.

    Accepts a TimeSeries or a plain 1-D array. Uses the global mean and
    divides both numerator and denominator by ``n``, so the result stays
    in [-1, 1].
    """
    x = series.present_values() if isinstance(series, TimeSeries) else np.asarray(series, float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("autocorrelation needs at least two samples")
    if lag < 0 or lag >= n:
        raise ValueError(f"lag must be in [0, {n - 1}], got {lag}")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise ValueError("autocorrelation undefined for a constant series")
    return float(d[: n - lag] @ d[lag:]) / denom


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def _parse_time(text: str) -> datetime:
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _format_time(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_csv(series: TimeSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value"])
        for ts, v, ok in zip(series.timestamps(), series.values, series.mask):
            w.writerow([_format_time(ts), repr(float(v)) if ok else ""])


def read_csv(path, interval: float | None = None) -> TimeSeries:
    """Read a ``timestamp,value`` file.

    The interval is taken from ``interval`` when given, otherwise from the
    first two rows. Rows must be strictly increasing and every step must
    match the interval to within 1%.
    """
    stamps, values, mask = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "value"]:
            raise ValueError(f"{path}:1: expected header 'timestamp,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                stamps.append(_parse_time(row[0]))
                if row[1].strip() == "":
                    values.append(0.0)
                    mask.append(False)
                else:
                    values.append(float(row[1]))
                    mask.append(True)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not stamps:
        raise ValueError(f"{path}: no data rows")
    if interval is None:
        interval = (stamps[1] - stamps[0]).total_seconds() if len(stamps) > 1 else DEFAULT_INTERVAL
    if interval <= 0:
        raise ValueError(f"{path}:3: timestamps are not increasing")
    for i in range(1, len(stamps)):
        step = (stamps[i] - stamps[i - 1]).total_seconds()
        if step <= 0:
            raise ValueError(f"{path}:{i + 2}: timestamps are not increasing")
        if abs(step - interval) > 0.01 * interval:
            raise ValueError(
                f"{path}:{i + 2}: step of {step:g}s drifts from interval {interval:g}s")
    return TimeSeries(stamps[0], float(interval), np.array(values), np.array(mask))
