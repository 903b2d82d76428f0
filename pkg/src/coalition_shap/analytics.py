"""Evaluation and explanation analytics.

Rolling evaluation over a test window, global feature importance as shares
of absolute SHAP mass, covariate dependence tables, and per-hour local
explanation reports with static monthly charts.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .engine import Explanation
from .errors import DataError
from .forecast import Forecaster, forecast, full_input
from .ingest import is_sunday_or_holiday
from .metrics import MetricReport, compute_metrics
from .series import HOUR, Dataset, ForecastTask

log = logging.getLogger(__name__)

DAY_CATEGORIES = (
    "sunday",
    "monday",
    "work_after_work",
    "work_after_holiday",
    "holiday_after_work",
    "holiday_after_holiday",
)


@dataclass(frozen=True)
class RollingEvaluation:
    report: MetricReport
    per_lead: tuple[MetricReport, ...]


def iter_origins(start: datetime, end: datetime, stride_hours: int, horizon_hours: int):
    """Forecast origins start, start+stride, ... whose horizon fits before end."""
    origin = start
    while origin + horizon_hours * HOUR <= end:
        yield origin
        origin = origin + stride_hours * HOUR


def rolling_evaluation(
    dataset: Dataset,
    forecaster: Forecaster,
    context_hours: int,
    stride_hours: int = 1,
    horizon_hours: int = 24,
    start: datetime | None = None,
    end: datetime | None = None,
) -> RollingEvaluation:
    """Score forecasts issued at every stride-th hour of [start, end).

    All (origin, lead) errors are pooled into one report; a per-lead
    breakdown is returned alongside. stride=1 scores every hour 24 times,
    stride=24 predicts each hour exactly once.
    """
    target = dataset.target
    if start is None:
        start = target.start + context_hours * HOUR
    if end is None:
        end = target.end
    if start + horizon_hours * HOUR > end:
        raise DataError("evaluation window shorter than the horizon")

    actual_rows, predicted_rows = [], []
    for origin in iter_origins(start, end, stride_hours, horizon_hours):
        task = ForecastTask(origin, context_hours, horizon_hours)
        output = forecast(forecaster, full_input(dataset, task))
        actual_rows.append(target.window(origin, horizon_hours))
        predicted_rows.append(output.median)
    if not actual_rows:
        raise DataError("no forecast origins inside the evaluation window")

    actuals = np.stack(actual_rows)
    preds = np.stack(predicted_rows)
    pooled = compute_metrics(actuals.ravel(), preds.ravel())
    per_lead = tuple(compute_metrics(actuals[:, k], preds[:, k]) for k in range(horizon_hours))
    return RollingEvaluation(report=pooled, per_lead=per_lead)


@dataclass(frozen=True)
class ImportanceTable:
    """Per-group share of the summed absolute SHAP mass, in percent."""

    groups: tuple[str, ...]
    percent: tuple[float, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.groups, self.percent))

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "percent"])
            for g, p in zip(self.groups, self.percent):
                writer.writerow([g, repr(float(p))])


def global_importance(explanations: Sequence[Explanation]) -> ImportanceTable:
    """importance(g) = sum of |shap[g][h]| over all explanations and hours, in percent."""
    if not explanations:
        raise DataError("no explanations")
    names = explanations[0].group_names
    for e in explanations[1:]:
        if e.group_names != names:
            raise DataError("explanations do not share a grouping")
    mass = np.zeros(len(names))
    for e in explanations:
        mass += np.abs(e.shap).sum(axis=1)
    total = mass.sum()
    if total == 0:
        raise DataError("all SHAP values are zero; importance shares are undefined")
    return ImportanceTable(groups=names, percent=tuple(100.0 * mass / total))


@dataclass(frozen=True)
class DependenceRow:
    timestamp: datetime
    group: str
    value: float
    delta_24h: float
    interaction: str
    shap: float


@dataclass(frozen=True)
class DependenceTable:
    group: str
    rows: tuple[DependenceRow, ...]

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "group", "value", "delta_24h", "interaction", "shap"])
            for r in self.rows:
                writer.writerow(
                    [
                        r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                        r.group,
                        repr(r.value),
                        repr(r.delta_24h),
                        r.interaction,
                        repr(r.shap),
                    ]
                )


def day_category(day, calendar, tz_unused=None) -> str:
    """One of the six holiday-dependence categories for a local calendar day."""
    if day.weekday() == 6:
        return "sunday"
    if day.weekday() == 0:
        return "monday"
    today = is_sunday_or_holiday(day, calendar)
    previous = is_sunday_or_holiday(day - timedelta(days=1), calendar)
    if today:
        return "holiday_after_holiday" if previous else "holiday_after_work"
    return "work_after_holiday" if previous else "work_after_work"


def dependence_table(
    explanations: Sequence[Explanation],
    dataset: Dataset,
    group: str,
    interaction: str = "hour",
    tz: str = "UTC",
) -> DependenceTable:
    """Per explained hour: covariate value, its 24h delta, an interaction label, SHAP.

    interaction="hour" labels rows with the local hour of day;
    interaction="day_category" labels them with the six Sunday/Monday/
    holiday-transition categories of the holiday dependence view.
    """
    if group not in dataset.covariates:
        raise DataError(f"{group!r} is not a covariate group")
    if interaction not in ("hour", "day_category"):
        raise DataError(f"unknown interaction {interaction!r}")
    zone = ZoneInfo(tz)
    series = dataset.covariates[group].series
    rows = []
    for e in explanations:
        shap = e.shap_for(group)
        for h in range(e.task.horizon_hours):
            ts = e.task.origin + h * HOUR
            value = float(series.values[series.index_of(ts)])
            prev = float(series.values[series.index_of(ts - 24 * HOUR)])
            local = ts.astimezone(zone)
            if interaction == "hour":
                label = str(local.hour)
            else:
                label = day_category(local.date(), dataset.holiday_calendar)
            rows.append(
                DependenceRow(
                    timestamp=ts,
                    group=group,
                    value=value,
                    delta_24h=value - prev,
                    interaction=label,
                    shap=float(shap[h]),
                )
            )
    return DependenceTable(group=group, rows=tuple(rows))


@dataclass(frozen=True)
class LocalReportRow:
    timestamp: datetime
    actual: float
    prediction: float
    base: float
    shap: dict[str, float]
    covariates: dict[str, float]


@dataclass(frozen=True)
class LocalReport:
    groups: tuple[str, ...]
    covariate_names: tuple[str, ...]
    rows: tuple[LocalReportRow, ...]
    missing_hours: int

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = (
                ["timestamp", "actual", "prediction", "base"]
                + [f"shap_{g}" for g in self.groups]
                + list(self.covariate_names)
            )
            writer.writerow(header)
            for r in self.rows:
                row = [
                    r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "" if np.isnan(r.actual) else repr(r.actual),
                    repr(r.prediction),
                    repr(r.base),
                ]
                row += [repr(r.shap[g]) for g in self.groups]
                row += [repr(r.covariates[c]) for c in self.covariate_names]
                writer.writerow(row)


def local_report(
    explanations: Sequence[Explanation],
    dataset: Dataset,
    start: datetime,
    end: datetime,
) -> LocalReport:
    """Hour-aligned table of actuals, predictions, per-group SHAP, covariates.

    Hours of the window not covered by any explanation are counted in
    missing_hours, not fatal. Every row keeps the efficiency identity
    prediction = base + sum(shap) reconstructable.
    """
    if not explanations:
        raise DataError("no explanations")
    names = explanations[0].group_names
    by_hour: dict[datetime, tuple[Explanation, int]] = {}
    for e in explanations:
        if e.group_names != names:
            raise DataError("explanations do not share a grouping")
        for h in range(e.task.horizon_hours):
            by_hour.setdefault(e.task.origin + h * HOUR, (e, h))

    cov_names = dataset.covariate_names()
    rows = []
    missing = 0
    ts = start
    while ts < end:
        hit = by_hour.get(ts)
        if hit is None:
            missing += 1
        else:
            e, h = hit
            target = dataset.target
            actual = float(target.values[target.index_of(ts)]) if target.covers(ts, ts + HOUR) else float("nan")
            rows.append(
                LocalReportRow(
                    timestamp=ts,
                    actual=actual,
                    prediction=float(e.full[h]),
                    base=float(e.base[h]),
                    shap={g: float(e.shap[i, h]) for i, g in enumerate(names)},
                    covariates={
                        c: float(dataset.covariates[c].series.values[dataset.covariates[c].series.index_of(ts)])
                        for c in cov_names
                    },
                )
            )
        ts = ts + HOUR
    if missing:
        log.warning("local report window has %d hours without explanations", missing)
    return LocalReport(groups=names, covariate_names=cov_names, rows=tuple(rows), missing_hours=missing)


def render_monthly_charts(report: LocalReport, out_dir: str | Path, prefix: str = "local") -> list[Path]:
    """One self-contained SVG per month: actual/prediction lines, stacked
    SHAP bands, covariate overlays. Embedded timestamps are omitted so
    identical runs produce identical bytes."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "coalition-shap"

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_month: dict[str, list[LocalReportRow]] = {}
    for row in report.rows:
        by_month.setdefault(row.timestamp.strftime("%Y-%m"), []).append(row)

    written = []
    for month, rows in sorted(by_month.items()):
        times = [r.timestamp for r in rows]
        fig, (ax_load, ax_shap, ax_cov) = plt.subplots(
            3, 1, figsize=(12, 7), sharex=True, height_ratios=[2, 2, 1]
        )
        actual = np.array([r.actual for r in rows])
        ax_load.plot(times, actual, color="black", lw=0.8, label="actual")
        ax_load.plot(times, [r.prediction for r in rows], color="tab:blue", lw=0.8, label="prediction")
        ax_load.set_ylabel("load")
        ax_load.legend(loc="upper right", fontsize=7)

        values = np.array([[r.shap[g] for r in rows] for g in report.groups])
        pos_base = np.zeros(len(rows))
        neg_base = np.zeros(len(rows))
        for i, g in enumerate(report.groups):
            v = values[i]
            top = np.where(v > 0, v, 0.0)
            bottom = np.where(v < 0, v, 0.0)
            ax_shap.fill_between(times, pos_base, pos_base + top, label=g, alpha=0.75, lw=0)
            ax_shap.fill_between(times, neg_base, neg_base + bottom, alpha=0.75, lw=0)
            pos_base += top
            neg_base += bottom
        ax_shap.axhline(0.0, color="black", lw=0.5)
        ax_shap.set_ylabel("SHAP")
        ax_shap.legend(loc="upper right", fontsize=6, ncol=2)

        for c in report.covariate_names:
            ax_cov.plot(times, [r.covariates[c] for r in rows], lw=0.7, label=c)
        ax_cov.set_ylabel("covariates")
        ax_cov.legend(loc="upper right", fontsize=6, ncol=3)
        fig.suptitle(month)
        fig.tight_layout()

        path = out_dir / f"{prefix}_{month}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
