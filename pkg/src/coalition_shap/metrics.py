"""Forecast accuracy metrics: MAE, RMSE, MAPE.

Missing actuals are excluded pairwise and counted; a zero actual under
MAPE is a hard error, because load never touches zero and an actual zero
signals a data bug rather than a case worth epsilon-flooring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class MetricReport:
    mae: float
    rmse: float
    mape: float
    n: int


def _paired(actuals, predictions) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(actuals, dtype=np.float64)
    yhat = np.asarray(predictions, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise DataError(f"length mismatch: {y.shape} actuals vs {yhat.shape} predictions")
    if len(y) < 1:
        raise DataError("metrics need at least one pair")
    keep = ~np.isnan(y)
    y, yhat = y[keep], yhat[keep]
    if len(y) == 0:
        raise DataError("all actuals are missing")
    if np.isnan(yhat).any():
        raise DataError("predictions contain missing values")
    return y, yhat


def mae(actuals, predictions) -> float:
    y, yhat = _paired(actuals, predictions)
    return float(np.mean(np.abs(y - yhat)))


def rmse(actuals, predictions) -> float:
    y, yhat = _paired(actuals, predictions)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mape(actuals, predictions) -> float:
    """Mean absolute percentage error, in percent."""
    y, yhat = _paired(actuals, predictions)
    if (y == 0).any():
        raise DataError("MAPE undefined: an actual value is zero")
    return float(100.0 * np.mean(np.abs((y - yhat) / y)))


def compute_metrics(actuals, predictions) -> MetricReport:
    y, yhat = _paired(actuals, predictions)
    return MetricReport(mae=mae(y, yhat), rmse=rmse(y, yhat), mape=mape(y, yhat), n=len(y))
