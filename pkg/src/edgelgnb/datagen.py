"""Synthetic weekly power-consumption corpus with labelled anomaly weeks.

A normal week has an elevated weekday load with one smooth afternoon peak
per weekday and a flat, lower weekend. Peak times wander from day to day.
An anomalous week has either one weekday peak turned into a trough, or a
weekday-style peak on one weekend day.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .series import DEFAULT_INTERVAL, TimeSeries, downsample, write_csv

SAMPLES_PER_DAY = 96
SAMPLES_PER_WEEK = 7 * SAMPLES_PER_DAY
NORMAL, ANOMALY = 0, 1
LABEL_NAMES = {NORMAL: "normal", ANOMALY: "anomaly"}
ANOMALY_KINDS = ("weekday_trough", "weekend_crest")
# 2018-01-01 is a Monday, so week k starts on a Monday for every k.
DEFAULT_START = datetime(2018, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class GeneratorConfig:
    weeks: int = 52
    interval: float = DEFAULT_INTERVAL
    peak_amplitude: float = 1.0
    base_load: float = 2.0
    weekend_drop: float = 1.5
    peak_hour: float = 14.0
    peak_width_hours: float = 8.0
    jitter_minutes: float = 45.0
    noise_std: float = 0.08
    anomaly_rate: float = 0.1
    anomaly_kinds: tuple = field(default=ANOMALY_KINDS)
    seed: int = 0

    def __post_init__(self):
        if int(self.weeks) != self.weeks or self.weeks < 1:
            raise ValueError("weeks must be a positive integer")
        if self.interval != DEFAULT_INTERVAL:
            raise ValueError("the generator only produces 15-minute (900 s) data")
        for name in ("peak_amplitude", "base_load", "peak_width_hours"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weekend_drop < 0 or self.jitter_minutes < 0 or self.noise_std < 0:
            raise ValueError("weekend_drop, jitter_minutes and noise_std must be nonnegative")
        if not 0.0 <= self.anomaly_rate <= 1.0:
            raise ValueError("anomaly_rate must be in [0, 1]")
        kinds = tuple(self.anomaly_kinds)
        if not kinds or any(k not in ANOMALY_KINDS for k in kinds):
            raise ValueError(f"anomaly_kinds must be a non-empty subset of {ANOMALY_KINDS}")
        object.__setattr__(self, "anomaly_kinds", kinds)

    @property
    def threshold(self):
        """Load level separating a daily peak from everything else."""
        return self.base_load + 0.5 * self.peak_amplitude

    def to_dict(self):
        d = asdict(self)
        d["anomaly_kinds"] = list(self.anomaly_kinds)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class LabeledSeries:
    series: TimeSeries
    labels: np.ndarray  # one per week
    kinds: tuple  # "" for normal weeks
    config: GeneratorConfig = None

    @property
    def weeks(self):
        return len(self.labels)


@dataclass(frozen=True)
class WindowSample:
    """One down-sampled week."""

    features: np.ndarray
    label: int
    source_id: str = ""


def _bump(hours, centre, width):
    u = (hours - centre) / (0.5 * width)
    return np.where(np.abs(u) < 1.0, 0.5 * (1.0 + np.cos(np.pi * u)), 0.0)


def _week_profile(cfg, rng, anomaly_kind=None, anomaly_day=None):
    hours = np.arange(SAMPLES_PER_DAY) * (cfg.interval / 3600.0)
    days = []
    for d in range(7):
        centre = cfg.peak_hour + rng.normal(0.0, cfg.jitter_minutes / 60.0)
        bump = _bump(hours, centre, cfg.peak_width_hours)
        weekday = d < 5
        if anomaly_kind == "weekday_trough" and d == anomaly_day:
            day = cfg.base_load - cfg.weekend_drop * bump
        elif anomaly_kind == "weekend_crest" and d == anomaly_day:
            day = cfg.base_load + cfg.peak_amplitude * bump
        elif weekday:
            day = cfg.base_load + cfg.peak_amplitude * bump
        else:
            day = np.full(SAMPLES_PER_DAY, cfg.base_load - cfg.weekend_drop)
        days.append(day)
    return np.concatenate(days)


def generate(config: GeneratorConfig, start_time: datetime = DEFAULT_START) -> LabeledSeries:
    """Draw ``config.weeks`` consecutive weeks of 15-minute load.

    Each week is independently anomalous with probability
    ``config.anomaly_rate``; its kind is chosen uniformly from
    ``config.anomaly_kinds`` and the affected day uniformly among the
    eligible days.
    """
    rng = np.random.default_rng(config.seed)
    weeks, labels, kinds = [], [], []
    for _ in range(config.weeks):
        kind, day = None, None
        if rng.random() < config.anomaly_rate:
            kind = config.anomaly_kinds[rng.integers(len(config.anomaly_kinds))]
            day = int(rng.integers(5)) if kind == "weekday_trough" else 5 + int(rng.integers(2))
        profile = _week_profile(config, rng, kind, day)
        if config.noise_std:
            profile = profile + rng.normal(0.0, config.noise_std, profile.shape)
        weeks.append(profile)
        labels.append(ANOMALY if kind else NORMAL)
        kinds.append(kind or "")
    series = TimeSeries(start_time, config.interval, np.concatenate(weeks))
    return LabeledSeries(series, np.array(labels, dtype=int), tuple(kinds), config)


def generate_population(config: GeneratorConfig, users: int = 4, spread: float = 0.2):
    """Independent corpora for several users.

    Each user gets its own seed (spawned from ``config.seed``) and a base
    load and peak amplitude scaled by a factor drawn from ``1 +/- spread``.
    """
    seq = np.random.SeedSequence(config.seed)
    out = []
    for child in seq.spawn(users):
        rng = np.random.default_rng(child)
        scale = 1.0 + spread * (2.0 * rng.random(2) - 1.0)
        user_seed = int(rng.integers(2**63))
        cfg = replace(config, seed=user_seed,
                      base_load=config.base_load * scale[0],
                      peak_amplitude=config.peak_amplitude * scale[1])
        out.append(generate(cfg))
    return out


def weekly_windows(ls: LabeledSeries, downsample_factor: int = 4, source: str = "") -> list:
    """Cut the series into one down-sampled sample per full week."""
    if int(downsample_factor) != downsample_factor or downsample_factor < 1:
        raise ValueError("downsample_factor must be a positive integer")
    if SAMPLES_PER_WEEK % downsample_factor:
        raise ValueError(f"downsample_factor {downsample_factor} does not divide {SAMPLES_PER_WEEK}")
    n_weeks = min(len(ls.series) // SAMPLES_PER_WEEK, len(ls.labels))
    if n_weeks < 1:
        raise ValueError("series does not cover a full week")
    coarse = downsample(ls.series, downsample_factor)
    per_week = SAMPLES_PER_WEEK // downsample_factor
    if not coarse.mask[: n_weeks * per_week].all():
        raise ValueError("series has missing samples; impute before windowing")
    values = coarse.values[: n_weeks * per_week].reshape(n_weeks, per_week)
    prefix = f"{source}:" if source else ""
    return [WindowSample(values[k].copy(), int(ls.labels[k]), f"{prefix}week{k}")
            for k in range(n_weeks)]


def shape_ok(week, config: GeneratorConfig, factor: int = 4) -> bool:
    """Check the normal weekly shape on one down-sampled week.

    True when each weekday holds exactly one local maximum above
    ``base + amplitude/2`` and no weekend sample exceeds that level.
    """
    week = np.asarray(week, dtype=float)
    per_day = SAMPLES_PER_DAY // factor
    if week.shape[0] != 7 * per_day:
        raise ValueError("week has the wrong length for this factor")
    thr = config.threshold
    padded = np.concatenate(([-np.inf], week, [-np.inf]))
    is_max = (week > padded[:-2]) & (week >= padded[2:]) & (week > thr)
    per_weekday = [int(is_max[d * per_day:(d + 1) * per_day].sum()) for d in range(5)]
    weekend_clear = not np.any(week[5 * per_day:] > thr)
    return per_weekday == [1] * 5 and weekend_clear


def write_corpus(ls: LabeledSeries, path, labels_path=None):
    """Write the series CSV and a ``week_index,label,kind`` sidecar.

    The sidecar defaults to ``<path stem>.labels.csv``.
    """
    path = Path(path)
    if labels_path is None:
        labels_path = path.with_name(path.stem + ".labels.csv")
    write_csv(ls.series, path)
    write_labels(ls.labels, ls.kinds, labels_path)
    return path, Path(labels_path)


def write_labels(labels, kinds, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week_index", "label", "kind"])
        for k, (lab, kind) in enumerate(zip(labels, kinds)):
            w.writerow([k, LABEL_NAMES[int(lab)], kind])


def read_labels(path):
    """Return ``(labels, kinds)`` from a labels sidecar."""
    names = {v: k for k, v in LABEL_NAMES.items()}
    labels, kinds = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["week_index", "label"]:
            raise ValueError(f"{path}:1: expected header 'week_index,label,kind'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if int(row[0]) != len(labels) or row[1] not in names:
                raise ValueError(f"{path}:{lineno}: malformed label row {row!r}")
            labels.append(names[row[1]])
            kinds.append(row[2] if len(row) > 2 else "")
    return np.array(labels, dtype=int), tuple(kinds)
