"""The forecaster contract the explanation engine drives.

A forecaster sees exactly one payload type, MaskedInput, and declares up
front which input shapes it tolerates (missing markers, dropped rows, empty
context). Outputs are validated at this boundary; nothing downstream trusts
a forecaster to have returned the right length or finite numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping

import numpy as np

from .errors import CapabilityViolation, DataError, ForecasterError
from .series import (
    HOUR,
    CovariateSlice,
    Dataset,
    ForecastTask,
    ensure_hour_aligned,
    slice_context,
)


@dataclass(frozen=True)
class Capabilities:
    """What input shapes a forecaster can consume.

    accepts_missing_target: target context may contain NaN markers.
    accepts_row_drop: target context rows may be non-contiguous in time.
    At least one of the two must hold, otherwise no temporal masking
    strategy exists for the model.
    """

    accepts_missing_target: bool
    accepts_row_drop: bool
    accepts_empty_target: bool = False
    max_context_hours: int = 8192
    deterministic: bool = True
    serial_only: bool = False

    def __post_init__(self):
        if not (self.accepts_missing_target or self.accepts_row_drop):
            raise DataError(
                "a forecaster must accept missing markers or dropped rows; "
                "neither leaves a usable temporal masking strategy"
            )
        if self.max_context_hours < 1:
            raise DataError("max_context_hours must be positive")


@dataclass(frozen=True)
class MaskedInput:
    """The exact payload a forecaster sees for one coalition.

    offsets are whole hours relative to origin (all negative, strictly
    increasing); values align with offsets and may be NaN where a masked
    hour is marked missing. Covariate past slices align row-wise with the
    offsets; future slices always have horizon_hours entries.
    """

    origin: datetime
    offsets: np.ndarray
    values: np.ndarray
    covariates: Mapping[str, CovariateSlice] = field(default_factory=dict)
    horizon_hours: int = 24
    quantiles: tuple[float, ...] = (0.5,)

    def __post_init__(self):
        object.__setattr__(self, "origin", ensure_hour_aligned(self.origin))
        offsets = np.asarray(self.offsets, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if offsets.shape != values.shape or offsets.ndim != 1:
            raise DataError("offsets and values must be matching 1-d arrays")
        if len(offsets) and offsets.max() >= 0:
            raise DataError("all target timestamps must precede the origin")
        if len(offsets) > 1 and (np.diff(offsets) <= 0).any():
            raise DataError("target timestamps must be strictly increasing")
        if np.isinf(values).any():
            raise DataError("target context contains infinities")
        object.__setattr__(self, "covariates", dict(self.covariates))
        object.__setattr__(self, "quantiles", tuple(self.quantiles))
        for arr in (offsets, values):
            arr.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "values", values)
        for name, cov in self.covariates.items():
            if len(cov.past) != len(offsets):
                raise DataError(f"covariate {name!r} past slice misaligned with context rows")
            if cov.future is not None and len(cov.future) != self.horizon_hours:
                raise DataError(f"covariate {name!r} future slice must cover the horizon")

    def __len__(self) -> int:
        return len(self.offsets)

    @property
    def target_times(self) -> tuple[datetime, ...]:
        return tuple(self.origin + int(o) * HOUR for o in self.offsets)

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())

    @property
    def is_contiguous(self) -> bool:
        """True when the rows form one unbroken hourly run ending at origin-1h."""
        if len(self.offsets) == 0:
            return True
        return bool((np.diff(self.offsets) == 1).all()) and int(self.offsets[-1]) == -1

    def observed_pairs(self) -> frozenset[tuple[int, float]]:
        """The (offset, value) pairs actually carrying target information."""
        keep = ~np.isnan(self.values)
        return frozenset(zip(self.offsets[keep].tolist(), self.values[keep].tolist()))


def full_input(dataset: Dataset, task: ForecastTask) -> MaskedInput:
    """The unmasked input: the whole context and every covariate."""
    ctx = slice_context(dataset, task)
    offsets = np.arange(-task.context_length_hours, 0, dtype=np.int64)
    return MaskedInput(
        origin=task.origin,
        offsets=offsets,
        values=ctx.target,
        covariates=ctx.covariates,
        horizon_hours=task.horizon_hours,
        quantiles=task.quantiles,
    )


@dataclass(frozen=True)
class ForecastOutput:
    """Median forecast vector, optionally accompanied by other quantiles."""

    median: np.ndarray
    quantile_values: Mapping[float, np.ndarray] | None = None

    def __post_init__(self):
        median = np.asarray(self.median, dtype=np.float64)
        median.flags.writeable = False
        object.__setattr__(self, "median", median)
        if self.quantile_values is not None:
            qv = {float(q): np.asarray(v, dtype=np.float64) for q, v in self.quantile_values.items()}
            object.__setattr__(self, "quantile_values", qv)


def check_forecast_output(output: ForecastOutput, horizon_hours: int, source: str = "forecaster") -> ForecastOutput:
    """Boundary validation: length, finiteness, quantile monotonicity.

    Raises ForecasterError; engine invariants must never chase adapter bugs.
    """
    median = output.median
    if median.shape != (horizon_hours,):
        raise ForecasterError(f"{source}: median has length {median.shape}, expected ({horizon_hours},)")
    if not np.isfinite(median).all():
        raise ForecasterError(f"{source}: median contains non-finite values")
    if output.quantile_values:
        levels = sorted(output.quantile_values)
        stacked = []
        for q in levels:
            v = output.quantile_values[q]
            if v.shape != (horizon_hours,):
                raise ForecasterError(f"{source}: quantile {q} has wrong length")
            if not np.isfinite(v).all():
                raise ForecasterError(f"{source}: quantile {q} contains non-finite values")
            stacked.append(v)
        for lo, hi in zip(stacked, stacked[1:]):
            if (hi < lo).any():
                raise ForecasterError(f"{source}: quantile values are not monotone in the level")
        if 0.5 in output.quantile_values and not np.array_equal(output.quantile_values[0.5], median):
            raise ForecasterError(f"{source}: median differs from the 0.5 quantile")
    return output


class ParamsMixin:
    """Estimator-style parameter introspection.

    get_params mirrors constructor arguments stored under the same attribute
    names, so configurations are introspectable and reproducible.
    """

    def get_params(self) -> dict:
        import inspect

        params = {}
        for key in inspect.signature(type(self).__init__).parameters:
            if key != "self" and hasattr(self, key):
                params[key] = getattr(self, key)
        return params

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class Forecaster(ParamsMixin):
    """Base class: subclasses implement predict(MaskedInput) -> ForecastOutput."""

    name: str = "forecaster"

    @property
    def capabilities(self) -> Capabilities:
        raise NotImplementedError

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        raise NotImplementedError


def check_masked_input(masked: MaskedInput, caps: Capabilities) -> None:
    """Assert the input satisfies the declared capabilities.

    A violation is an engine bug and is surfaced as CapabilityViolation,
    never coerced into a different masking form here.
    """
    if len(masked) > caps.max_context_hours:
        raise CapabilityViolation(
            f"context of {len(masked)} hours exceeds max_context_hours={caps.max_context_hours}"
        )
    if len(masked) == 0:
        if not caps.accepts_empty_target:
            raise CapabilityViolation("empty target context sent to a forecaster that rejects it")
        return
    if masked.has_missing and not caps.accepts_missing_target:
        raise CapabilityViolation("missing markers sent to a forecaster that rejects them")
    if not masked.is_contiguous and not caps.accepts_row_drop:
        raise CapabilityViolation("non-contiguous rows sent to a forecaster that rejects row drops")


def forecast(forecaster: Forecaster, masked: MaskedInput) -> ForecastOutput:
    """Checked entry point: capability check, predict, output validation."""
    check_masked_input(masked, forecaster.capabilities)
    try:
        output = forecaster.predict(masked)
    except ForecasterError:
        raise
    except Exception as exc:
        raise ForecasterError(f"{forecaster.name} failed: {exc}") from exc
    return check_forecast_output(output, masked.horizon_hours, source=forecaster.name)


def base_prediction(dataset: Dataset, task: ForecastTask, base_window_hours: int) -> ForecastOutput:
    """Model-free fallback: mean load over the trailing window, repeated H times.

    The window is [origin - base_window, origin), clipped to the data span;
    missing values are skipped. A window without a single observed value is
    an error.
    """
    if base_window_hours < 1:
        raise DataError("base_window_hours must be positive")
    target = dataset.target
    start = max(task.origin - base_window_hours * HOUR, target.start)
    n = int((min(task.origin, target.end) - start) / HOUR)
    if n <= 0:
        raise DataError("base window lies outside the dataset")
    window = target.window(start, n)
    finite = window[~np.isnan(window)]
    if len(finite) == 0:
        raise DataError("base window contains no observed values")
    level = float(finite.mean())
    return ForecastOutput(median=np.full(task.horizon_hours, level))
