"""CSV ingestion, holiday calendars, and the canonical hourly CSV format.

Canonical format: header row, ISO-8601 UTC `timestamp` column, one numeric
column per series, empty cell = missing. Writing then re-ingesting a series
reproduces it bit-exactly.
"""

from __future__ import annotations

import csv
from datetime import date, datetime, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .errors import DataError
from .series import HOUR, CovariateSeries, HourlySeries, ensure_utc

LOAD_COLUMNS = {"timestamp": "timestamp", "value": "load_mw"}
WEATHER_COLUMNS = ("temperature_c", "irradiance_wm2")


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {text!r}") from exc
    return ensure_utc(ts)


def _floor_hour(ts: datetime) -> datetime:
    return ts.replace(minute=0, second=0, microsecond=0)


def ingest_hourly_csv(
    path: str | Path,
    value_column: str,
    *,
    timestamp_column: str = "timestamp",
    name: str | None = None,
    unit: str = "",
) -> HourlySeries:
    """Read one value column from a CSV into a gap-free hourly series.

    Sub-hourly rows are averaged into their hour; hours absent between the
    first and last observation become NaN. Rows with an empty value cell are
    skipped. Exact-duplicate timestamps must agree on the value.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    samples: dict[datetime, list[float]] = {}
    exact: dict[datetime, float] = {}
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or timestamp_column not in reader.fieldnames:
            raise DataError(f"{path}: missing {timestamp_column!r} column")
        if value_column not in reader.fieldnames:
            raise DataError(f"{path}: missing {value_column!r} column")
        for row in reader:
            raw = (row.get(value_column) or "").strip()
            if not raw:
                continue
            ts = parse_timestamp(row[timestamp_column])
            try:
                value = float(raw)
            except ValueError as exc:
                raise DataError(f"{path}: non-numeric value {raw!r} at {ts.isoformat()}") from exc
            if not np.isfinite(value):
                raise DataError(f"{path}: non-finite value at {ts.isoformat()}")
            if ts in exact and exact[ts] != value:
                raise DataError(f"{path}: conflicting duplicate rows at {ts.isoformat()}")
            if ts not in exact:
                exact[ts] = value
                samples.setdefault(_floor_hour(ts), []).append(value)
    if not samples:
        raise DataError(f"{path}: zero usable rows")
    hours = sorted(samples)
    start, last = hours[0], hours[-1]
    n = int((last - start) / HOUR) + 1
    values = np.full(n, np.nan)
    for hour, vals in samples.items():
        values[int((hour - start) / HOUR)] = float(np.mean(vals))
    return HourlySeries(name=name or value_column, start=start, values=values, unit=unit)


def ingest_load_csv(path: str | Path, column_map: dict[str, str] | None = None) -> HourlySeries:
    """Ingest the load CSV (`timestamp,load_mw` by default) as the target series."""
    cols = dict(LOAD_COLUMNS)
    if column_map:
        cols.update(column_map)
    return ingest_hourly_csv(
        path,
        cols["value"],
        timestamp_column=cols["timestamp"],
        name="load",
        unit="MW",
    )


def ingest_weather_csv(path: str | Path) -> dict[str, CovariateSeries]:
    """Ingest `timestamp,temperature_c,irradiance_wm2` into future-known covariates."""
    temperature = ingest_hourly_csv(path, "temperature_c", name="temperature", unit="degC")
    irradiance = ingest_hourly_csv(path, "irradiance_wm2", name="irradiance", unit="W/m2")
    return {
        "temperature": CovariateSeries(temperature, future_known=True),
        "irradiance": CovariateSeries(irradiance, future_known=True),
    }


def read_holiday_calendar(path: str | Path) -> frozenset[date]:
    """Read one ISO date per line; `#` starts a comment, blank lines ignored."""
    days = set()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            days.add(date.fromisoformat(body))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad date {body!r}") from exc
    return frozenset(days)


def is_sunday_or_holiday(day: date, calendar: frozenset[date]) -> bool:
    return day.weekday() == 6 or day in calendar


def build_holiday_covariate(
    calendar: frozenset[date],
    start: datetime,
    hours: int,
    tz: str = "UTC",
) -> CovariateSeries:
    """Indicator series: 1 for every hour of a local-time Sunday or listed holiday.

    `start` is a UTC hour; the Sunday/holiday test converts each hour into
    the given IANA zone, so DST days get their 23 or 25 local hours flagged
    consistently. An empty calendar yields a Sundays-only indicator.
    """
    zone = ZoneInfo(tz)
    start = ensure_utc(start)
    values = np.zeros(hours)
    for k in range(hours):
        local_day = (start + k * HOUR).astimezone(zone).date()
        if is_sunday_or_holiday(local_day, calendar):
            values[k] = 1.0
    series = HourlySeries(name="holiday", start=start, values=values, unit="indicator")
    return CovariateSeries(series, future_known=True)


def write_series_csv(path: str | Path, series_list: list[HourlySeries]) -> None:
    """Write aligned series to the canonical CSV format (empty cell = NaN)."""
    if not series_list:
        raise DataError("nothing to write")
    start = series_list[0].start
    n = len(series_list[0])
    for s in series_list[1:]:
        if s.start != start or len(s) != n:
            raise DataError("canonical CSV requires identically aligned series")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [s.name for s in series_list])
        for k in range(n):
            ts = (start + k * HOUR).astimezone(timezone.utc)
            row = [ts.strftime("%Y-%m-%dT%H:%M:%SZ")]
            for s in series_list:
                v = s.values[k]
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)
