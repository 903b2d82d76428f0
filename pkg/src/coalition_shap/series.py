"""Hourly time-series domain types: series, datasets, tasks, splits, slicing.

Everything is stored and indexed in UTC; NaN is the missing marker.
Calendar semantics (Sundays, holidays, local midnights) live with the
consumers that need a timezone, not here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Mapping

import numpy as np

from .errors import DataError

HOUR = timedelta(hours=1)


def ensure_utc(ts: datetime) -> datetime:
    """Normalize a timestamp to tz-aware UTC. Naive input is taken as UTC."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def ensure_hour_aligned(ts: datetime) -> datetime:
    ts = ensure_utc(ts)
    if ts.minute or ts.second or ts.microsecond:
        raise DataError(f"timestamp not aligned to the hour: {ts.isoformat()}")
    return ts


def hours_between(earlier: datetime, later: datetime) -> int:
    """Whole hours from `earlier` to `later`; errors if not an exact multiple."""
    delta = ensure_utc(later) - ensure_utc(earlier)
    seconds = delta.total_seconds()
    hours = round(seconds / 3600)
    if hours * 3600 != seconds:
        raise DataError(f"interval {earlier} .. {later} is not a whole number of hours")
    return hours


@dataclass(frozen=True)
class HourlySeries:
    """A gap-free UTC-hourly sequence of values; NaN marks missing hours.

    The timestamp of values[k] is start + k hours. Infinities are rejected
    at construction; NaN is the only non-finite value allowed.
    """

    name: str
    start: datetime
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "start", ensure_hour_aligned(self.start))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise DataError(f"series {self.name!r}: values must be one-dimensional")
        if np.isinf(vals).any():
            raise DataError(f"series {self.name!r}: infinite values are not allowed")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> datetime:
        """Exclusive end timestamp (first hour after the series)."""
        return self.start + len(self.values) * HOUR

    def timestamp_at(self, index: int) -> datetime:
        return self.start + index * HOUR

    def index_of(self, ts: datetime) -> int:
        idx = hours_between(self.start, ts)
        if not 0 <= idx < len(self.values):
            raise DataError(
                f"series {self.name!r} does not cover {ts.isoformat()} "
                f"(span {self.start.isoformat()} .. {self.end.isoformat()})"
            )
        return idx

    def covers(self, start: datetime, end: datetime) -> bool:
        """True if the half-open range [start, end) lies inside the series."""
        return self.start <= ensure_utc(start) and ensure_utc(end) <= self.end

    def window(self, start: datetime, n_hours: int) -> np.ndarray:
        """Values for the n_hours hours beginning at `start`."""
        i = self.index_of(start)
        if i + n_hours > len(self.values):
            raise DataError(
                f"series {self.name!r}: window of {n_hours}h from "
                f"{start.isoformat()} exceeds coverage"
            )
        return self.values[i : i + n_hours]

    def slice(self, start: datetime, end: datetime) -> "HourlySeries":
        n = hours_between(start, end)
        return HourlySeries(self.name, ensure_utc(start), self.window(start, n), self.unit)


@dataclass(frozen=True)
class CovariateSeries:
    """A covariate with a flag saying whether it is known over the horizon."""

    series: HourlySeries
    future_known: bool = False

    @property
    def name(self) -> str:
        return self.series.name


@dataclass(frozen=True)
class CovariateSlice:
    """One covariate's view inside a model input.

    `past` aligns element-wise with the target context rows; `future` covers
    the horizon hours origin .. origin+H-1 and is None for past-only covariates.
    """

    past: np.ndarray
    future: np.ndarray | None = None


@dataclass(frozen=True)
class Dataset:
    """Target load series plus named covariates and the holiday calendar."""

    target: HourlySeries
    covariates: Mapping[str, CovariateSeries] = field(default_factory=dict)
    holiday_calendar: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "covariates", dict(self.covariates))
        object.__setattr__(self, "holiday_calendar", frozenset(self.holiday_calendar))
        for name, cov in self.covariates.items():
            if name != cov.series.name:
                raise DataError(f"covariate key {name!r} != series name {cov.series.name!r}")
            if not cov.series.covers(self.target.start, self.target.end):
                raise DataError(f"covariate {name!r} does not cover the target span")
            if cov.series.unit == "indicator":
                vals = cov.series.values
                finite = vals[~np.isnan(vals)]
                if not np.isin(finite, (0.0, 1.0)).all():
                    raise DataError(f"indicator covariate {name!r} has values outside {{0, 1}}")
        for d in self.holiday_calendar:
            if not isinstance(d, date) or isinstance(d, datetime):
                raise DataError("holiday_calendar entries must be dates")

    def covariate_names(self) -> tuple[str, ...]:
        return tuple(self.covariates)


@dataclass(frozen=True)
class ForecastTask:
    """One prediction: the first forecast hour is `origin`."""

    origin: datetime
    context_length_hours: int
    horizon_hours: int = 24
    quantiles: tuple[float, ...] = (0.5,)

    def __post_init__(self):
        object.__setattr__(self, "origin", ensure_hour_aligned(self.origin))
        object.__setattr__(self, "quantiles", tuple(self.quantiles))
        if self.context_length_hours < 1:
            raise DataError("context_length_hours must be >= 1")
        if self.horizon_hours < 1:
            raise DataError("horizon_hours must be >= 1")
        for q in self.quantiles:
            if not 0.0 < q < 1.0:
                raise DataError(f"quantile {q} outside (0, 1)")

    @property
    def context_start(self) -> datetime:
        return self.origin - self.context_length_hours * HOUR

    @property
    def horizon_end(self) -> datetime:
        return self.origin + self.horizon_hours * HOUR


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split boundaries (each exclusive end of its segment)."""

    train_end: datetime
    val_end: datetime
    test_end: datetime

    def __post_init__(self):
        for name in ("train_end", "val_end", "test_end"):
            object.__setattr__(self, name, ensure_hour_aligned(getattr(self, name)))
        if not self.train_end < self.val_end < self.test_end:
            raise DataError("split boundaries must satisfy train_end < val_end < test_end")


@dataclass(frozen=True)
class ContextSlices:
    """Raw, unmasked model input for a task: full context plus covariates."""

    target: np.ndarray
    covariates: dict[str, CovariateSlice]


def slice_context(dataset: Dataset, task: ForecastTask) -> ContextSlices:
    """Cut the C-hour target context and per-covariate past/future slices.

    target[k] is the hour origin-C+k; a future slice's index k is origin+k.
    Past-only covariates contribute no future slice. Raises DataError when
    any required span is not covered.
    """
    c_start = task.context_start
    target = dataset.target.window(c_start, task.context_length_hours)
    covs: dict[str, CovariateSlice] = {}
    for name, cov in dataset.covariates.items():
        past = cov.series.window(c_start, task.context_length_hours)
        future = None
        if cov.future_known:
            future = cov.series.window(task.origin, task.horizon_hours)
        covs[name] = CovariateSlice(past=past, future=future)
    return ContextSlices(target=target, covariates=covs)


def _slice_dataset(dataset: Dataset, start: datetime, end: datetime) -> Dataset:
    covs = {
        name: CovariateSeries(cov.series.slice(start, end), cov.future_known)
        for name, cov in dataset.covariates.items()
    }
    return Dataset(
        target=dataset.target.slice(start, end),
        covariates=covs,
        holiday_calendar=dataset.holiday_calendar,
    )


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Partition into train/val/test at the split boundaries.

    Segments are [start, train_end), [train_end, val_end), [val_end, test_end):
    disjoint and contiguous; exhaustive when test_end equals the series end.
    """
    t = dataset.target
    for name, boundary in (("train_end", spec.train_end), ("val_end", spec.val_end), ("test_end", spec.test_end)):
        if not (t.start < boundary <= t.end):
            raise DataError(
                f"{name} {boundary.isoformat()} outside dataset span "
                f"{t.start.isoformat()} .. {t.end.isoformat()}"
            )
    train = _slice_dataset(dataset, t.start, spec.train_end)
    val = _slice_dataset(dataset, spec.train_end, spec.val_end)
    test = _slice_dataset(dataset, spec.val_end, spec.test_end)
    return train, val, test
