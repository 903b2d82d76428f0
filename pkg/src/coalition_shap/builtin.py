"""Desk-scale built-in forecasters.

These make the suite self-contained: the day-type persistence baseline, a
seasonal-naive reference, a covariate-aware ridge model (so covariate
masking has measurable effect), and an additive oracle whose grouped SHAP
values are known in closed form.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping
from zoneinfo import ZoneInfo

import numpy as np

from .errors import DataError, ForecasterError
from .forecast import (
    Capabilities,
    Forecaster,
    ForecastOutput,
    MaskedInput,
    forecast,
    full_input,
)
from .grouping import GroupingSpec
from .ingest import is_sunday_or_holiday
from .series import HOUR, Dataset, ForecastTask


class DayType(enum.Enum):
    WORKDAY = "workday"
    SATURDAY = "saturday"
    SUNDAY_OR_HOLIDAY = "sunday_or_holiday"


def day_type(day: date, holidays: frozenset[date]) -> DayType:
    """Classify a calendar day; a listed holiday overrides the weekday."""
    if is_sunday_or_holiday(day, holidays):
        return DayType.SUNDAY_OR_HOLIDAY
    if day.weekday() == 5:
        return DayType.SATURDAY
    return DayType.WORKDAY


def _local_hour_exists(local: datetime, zone: ZoneInfo) -> datetime | None:
    """UTC instant for a local wall-clock hour, or None if DST skips it.

    Ambiguous (repeated) hours resolve to the earlier instant (fold=0).
    """
    utc = local.replace(tzinfo=zone).astimezone(timezone.utc)
    back = utc.astimezone(zone)
    if back.hour != local.hour or back.date() != local.date():
        return None
    return utc


class DayTypeBaseline(Forecaster):
    """Copies the observed load from the last day of the same type.

    Day types are workday, Saturday, and Sunday/holiday; hours are matched
    by local hour-of-day in the configured zone. If the nearest same-type
    day lacks the needed observation, the search continues to the next
    older one, up to `search_days` back.
    """

    name = "baseline"

    def __init__(self, holidays: frozenset[date] = frozenset(), tz: str = "UTC", search_days: int = 60):
        self.holidays = frozenset(holidays)
        self.tz = tz
        self.search_days = search_days
        self._zone = ZoneInfo(tz)

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            accepts_missing_target=True,
            accepts_row_drop=True,
            accepts_empty_target=False,
            max_context_hours=1 << 20,
        )

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        observed = {
            int(o): float(v) for o, v in zip(masked.offsets, masked.values) if not np.isnan(v)
        }
        out = np.empty(masked.horizon_hours)
        for k in range(masked.horizon_hours):
            hour_utc = masked.origin + k * HOUR
            local = hour_utc.astimezone(self._zone)
            wanted = day_type(local.date(), self.holidays)
            value = None
            for back in range(1, self.search_days + 1):
                candidate_day = local.date() - timedelta(days=back)
                if day_type(candidate_day, self.holidays) is not wanted:
                    continue
                source = _local_hour_exists(
                    datetime.combine(candidate_day, local.time().replace(fold=0)), self._zone
                )
                if source is None:
                    continue
                offset = round((source - masked.origin).total_seconds() / 3600)
                if offset in observed:
                    value = observed[offset]
                    break
            if value is None:
                raise ForecasterError(
                    f"no prior {wanted.value} day with an observation for "
                    f"{hour_utc.isoformat()} within {self.search_days} days of context"
                )
            out[k] = value
        return ForecastOutput(median=out)


def daytype_baseline(dataset: Dataset, task: ForecastTask, tz: str = "UTC") -> ForecastOutput:
    """Spec-shaped wrapper: run the day-type baseline on the full context."""
    model = DayTypeBaseline(dataset.holiday_calendar, tz=tz)
    return forecast(model, full_input(dataset, task))


class SeasonalNaive(Forecaster):
    """output[k] = target value at origin + k - period."""

    name = "seasonal-naive"

    def __init__(self, period_hours: int = 168):
        if period_hours < 1:
            raise DataError("period_hours must be positive")
        self.period_hours = period_hours

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            accepts_missing_target=True,
            accepts_row_drop=True,
            max_context_hours=1 << 20,
        )

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        lookup = {int(o): float(v) for o, v in zip(masked.offsets, masked.values) if not np.isnan(v)}
        out = np.empty(masked.horizon_hours)
        for k in range(masked.horizon_hours):
            source = k - self.period_hours
            if source not in lookup:
                raise ForecasterError(
                    f"seasonal-naive source value at offset {source} is missing from the context"
                )
            out[k] = lookup[source]
        return ForecastOutput(median=out)


def seasonal_naive(dataset: Dataset, task: ForecastTask, period_hours: int = 168) -> ForecastOutput:
    return forecast(SeasonalNaive(period_hours), full_input(dataset, task))


@dataclass(frozen=True)
class FeatureRecipe:
    """Feature construction for the linear model.

    target_lags are hours before the predicted hour and must be >= the
    horizon so they always fall inside the context. Weather covariates
    enter as the difference to their value `delta_hours` earlier
    (temperature first passes through the heating transform
    max(0, threshold - T)); indicator covariates enter at the predicted
    hour. Hour-of-week dummies carry the calendar profile.
    """

    target_lags: tuple[int, ...] = (24,)
    hour_of_week: bool = True
    delta_hours: int = 24
    heating_threshold_c: float | None = 15.0

    def to_dict(self) -> dict:
        return {
            "target_lags": list(self.target_lags),
            "hour_of_week": self.hour_of_week,
            "delta_hours": self.delta_hours,
            "heating_threshold_c": self.heating_threshold_c,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureRecipe":
        return cls(
            target_lags=tuple(data["target_lags"]),
            hour_of_week=bool(data["hour_of_week"]),
            delta_hours=int(data["delta_hours"]),
            heating_threshold_c=data.get("heating_threshold_c"),
        )


class LinearCovariateForecaster(Forecaster):
    """Ridge regression on lags, calendar dummies, and covariate features.

    Masking conventions (properties of this forecaster, not of the engine):
    missing lags fall back to the mean of the available context, and absent
    covariates contribute the training mean of their feature column.
    """

    name = "linear"

    def __init__(self, recipe: FeatureRecipe = FeatureRecipe(), ridge_penalty: float = 1e-6, tz: str = "UTC"):
        if ridge_penalty < 0:
            raise DataError("ridge_penalty must be non-negative")
        self.recipe = recipe
        self.ridge_penalty = ridge_penalty
        self.tz = tz
        self._zone = ZoneInfo(tz)
        self._fitted = False

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            accepts_missing_target=True,
            accepts_row_drop=True,
            accepts_empty_target=True,
            max_context_hours=1 << 20,
        )

    # -- feature construction ------------------------------------------------

    def _hour_of_week(self, ts: datetime) -> int:
        local = ts.astimezone(self._zone)
        return local.weekday() * 24 + local.hour

    def _is_indicator(self, name: str) -> bool:
        return self._units.get(name) == "indicator"

    def _transform(self, name: str, values: np.ndarray) -> np.ndarray:
        thr = self.recipe.heating_threshold_c
        if thr is not None and self._units.get(name) == "degC":
            return np.maximum(thr - values, 0.0)
        return values

    def _feature_names(self, covariates: tuple[str, ...]) -> list[str]:
        names = ["intercept"] + [f"lag_{lag}" for lag in self.recipe.target_lags]
        if self.recipe.hour_of_week:
            names += [f"how_{i}" for i in range(168)]
        for c in covariates:
            names.append(f"{c}_level" if self._is_indicator(c) else f"{c}_delta{self.recipe.delta_hours}")
        return names

    def fit(self, train: Dataset) -> "LinearCovariateForecaster":
        """Least-squares fit over all training hours with complete features."""
        target = train.target
        self._covariates = train.covariate_names()
        self._units = {name: cov.series.unit for name, cov in train.covariates.items()}
        names = self._feature_names(self._covariates)
        max_lag = max([*self.recipe.target_lags, self.recipe.delta_hours])

        rows, ys = [], []
        values = target.values
        cov_vals = {name: train.covariates[name].series.values for name in self._covariates}
        cov_offsets = {
            name: int((target.start - train.covariates[name].series.start) / HOUR)
            for name in self._covariates
        }
        for t in range(max_lag, len(values)):
            y = values[t]
            if np.isnan(y):
                continue
            row = [1.0]
            for lag in self.recipe.target_lags:
                row.append(values[t - lag])
            if self.recipe.hour_of_week:
                how = self._hour_of_week(target.timestamp_at(t))
                onehot = [0.0] * 168
                onehot[how] = 1.0
                row += onehot
            for c in self._covariates:
                vals = cov_vals[c]
                at = cov_offsets[c] + t
                if self._is_indicator(c):
                    row.append(vals[at])
                else:
                    now = self._transform(c, vals[at : at + 1])[0]
                    prev = self._transform(c, vals[at - self.recipe.delta_hours : at - self.recipe.delta_hours + 1])[0]
                    row.append(now - prev)
            if any(math.isnan(v) for v in row):
                continue
            rows.append(row)
            ys.append(y)
        if not rows:
            raise DataError("no usable training rows after dropping missing values")

        x = np.asarray(rows)
        y = np.asarray(ys)
        gram = x.T @ x + self.ridge_penalty * np.eye(x.shape[1])
        if self.ridge_penalty == 0.0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
            raise DataError("singular normal equations; use a positive ridge penalty")
        try:
            beta = np.linalg.solve(gram, x.T @ y)
        except np.linalg.LinAlgError as exc:
            raise DataError(
                "singular normal equations; use a positive ridge penalty"
            ) from exc
        self._beta = beta
        self._names = names
        self._feature_means = x.mean(axis=0)
        self._target_mean = float(y.mean())
        self._fitted = True
        return self

    def coefficient(self, feature: str) -> float:
        self._require_fitted()
        return float(self._beta[self._names.index(feature)])

    def _require_fitted(self):
        if not self._fitted:
            raise DataError("forecaster is not fitted")

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        self._require_fitted()
        context = {int(o): float(v) for o, v in zip(masked.offsets, masked.values) if not np.isnan(v)}
        ctx_mean = float(np.mean(list(context.values()))) if context else self._target_mean
        offsets = masked.offsets

        def past_value(name: str, offset: int) -> float:
            cov = masked.covariates[name]
            idx = np.searchsorted(offsets, offset)
            if idx < len(offsets) and offsets[idx] == offset:
                return float(cov.past[idx])
            return math.nan

        out = np.empty(masked.horizon_hours)
        for k in range(masked.horizon_hours):
            row = [1.0]
            for lag in self.recipe.target_lags:
                row.append(context.get(k - lag, ctx_mean))
            if self.recipe.hour_of_week:
                how = self._hour_of_week(masked.origin + k * HOUR)
                onehot = [0.0] * 168
                onehot[how] = 1.0
                row += onehot
            for i, c in enumerate(self._covariates):
                col = len(row)
                cov = masked.covariates.get(c)
                if cov is None or cov.future is None:
                    row.append(self._feature_means[col])
                    continue
                now_raw = float(cov.future[k])
                if self._is_indicator(c):
                    row.append(self._feature_means[col] if math.isnan(now_raw) else now_raw)
                    continue
                prev_off = k - self.recipe.delta_hours
                prev_raw = float(cov.future[prev_off]) if prev_off >= 0 else past_value(c, prev_off)
                if math.isnan(now_raw) or math.isnan(prev_raw):
                    row.append(self._feature_means[col])
                else:
                    now = self._transform(c, np.array([now_raw]))[0]
                    prev = self._transform(c, np.array([prev_raw]))[0]
                    row.append(now - prev)
            out[k] = float(np.dot(self._beta, row))
        return ForecastOutput(median=out)

    def save(self, path: str | Path) -> None:
        self._require_fitted()
        body = {
            "recipe": self.recipe.to_dict(),
            "ridge_penalty": self.ridge_penalty,
            "tz": self.tz,
            "covariates": list(self._covariates),
            "units": self._units,
            "feature_names": self._names,
            "beta": self._beta.tolist(),
            "feature_means": self._feature_means.tolist(),
            "target_mean": self._target_mean,
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(body, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "LinearCovariateForecaster":
        body = json.loads(Path(path).read_text())
        model = cls(
            recipe=FeatureRecipe.from_dict(body["recipe"]),
            ridge_penalty=float(body["ridge_penalty"]),
            tz=body["tz"],
        )
        model._covariates = tuple(body["covariates"])
        model._units = dict(body["units"])
        model._names = list(body["feature_names"])
        model._beta = np.asarray(body["beta"])
        model._feature_means = np.asarray(body["feature_means"])
        model._target_mean = float(body["target_mean"])
        model._fitted = True
        return model


class AdditiveOracle(Forecaster):
    """Forecaster whose grouped SHAP values are known analytically.

    The prediction is intercept + sum of per-group terms, where a temporal
    group contributes weight * mean(its present target values) and a
    covariate contributes weight * mean(its future slice); absent groups
    contribute 0. Because the value function is purely additive, each
    group's Shapley value equals its own term, up to the engine's base
    substitution at the empty coalition (see `analytic_shap`).
    """

    name = "additive-oracle"

    def __init__(
        self,
        grouping: GroupingSpec,
        intercept: float = 0.0,
        covariate_weights: Mapping[str, float] | None = None,
        temporal_weights: Mapping[str, float] | None = None,
    ):
        self.grouping = grouping
        self.intercept = float(intercept)
        self.covariate_weights = dict(covariate_weights or {})
        self.temporal_weights = dict(temporal_weights or {})
        unknown = set(self.covariate_weights) - set(grouping.covariate_groups)
        unknown |= set(self.temporal_weights) - {g.name for g in grouping.temporal_groups}
        if unknown:
            raise DataError(f"oracle weights for unknown groups: {sorted(unknown)}")

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            accepts_missing_target=True,
            accepts_row_drop=True,
            accepts_empty_target=True,
            max_context_hours=1 << 20,
        )

    def _temporal_term(self, group, offsets: np.ndarray, values: np.ndarray) -> float:
        weight = self.temporal_weights.get(group.name, 0.0)
        inside = (offsets >= group.oldest) & (offsets <= group.newest) & ~np.isnan(values)
        if not inside.any():
            return 0.0
        return weight * float(values[inside].mean())

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        total = self.intercept
        for group in self.grouping.temporal_groups:
            total += self._temporal_term(group, masked.offsets, masked.values)
        for name, weight in self.covariate_weights.items():
            cov = masked.covariates.get(name)
            if cov is not None and cov.future is not None and len(cov.future):
                total += weight * float(np.mean(cov.future))
        return ForecastOutput(median=np.full(masked.horizon_hours, total))

    def analytic_terms(self, dataset: Dataset, task: ForecastTask) -> dict[str, float]:
        """Each group's additive term on the full (unmasked) input."""
        masked = full_input(dataset, task)
        terms = {}
        for group in self.grouping.temporal_groups:
            terms[group.name] = self._temporal_term(group, masked.offsets, masked.values)
        for name in self.grouping.covariate_groups:
            cov = masked.covariates.get(name)
            weight = self.covariate_weights.get(name, 0.0)
            if cov is not None and cov.future is not None and len(cov.future):
                terms[name] = weight * float(np.mean(cov.future))
            else:
                terms[name] = 0.0
        return terms

    def analytic_shap(self, dataset: Dataset, task: ForecastTask, base_value: float) -> dict[str, float]:
        """Closed-form grouped Shapley values when the empty coalition is the base.

        The engine fills the empty coalition with the base prediction rather
        than this oracle's intercept, which shifts every group's value by
        (intercept - base) / N relative to its own additive term.
        """
        terms = self.analytic_terms(dataset, task)
        correction = (self.intercept - base_value) / self.grouping.n_groups
        return {name: term + correction for name, term in terms.items()}
