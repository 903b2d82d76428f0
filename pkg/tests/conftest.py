"""Shared fixtures and independent test oracles."""

import math
from datetime import datetime, timedelta, timezone
from itertools import combinations

import numpy as np
import pytest

import coalition_shap as cs

UTC = timezone.utc
HOUR = timedelta(hours=1)


def utc(*args) -> datetime:
    return datetime(*args, tzinfo=UTC)


def brute_force_shapley(names, value_of):
    """Textbook Shapley values over named players, straight from the formula.

    `value_of` maps a frozenset of player names to an H-vector. Kept
    deliberately independent of the engine's encoding, weights, and
    aggregation path.
    """
    n = len(names)
    result = {}
    for player in names:
        others = [p for p in names if p != player]
        total = None
        for size in range(n):
            for subset in combinations(others, size):
                s = frozenset(subset)
                weight = math.factorial(n - 1 - size) * math.factorial(size) / math.factorial(n)
                marginal = np.asarray(value_of(s | {player})) - np.asarray(value_of(s))
                total = weight * marginal if total is None else total + weight * marginal
        result[player] = total
    return result


def make_series(start, values, name="load", unit="MW"):
    return cs.HourlySeries(name, start, np.asarray(values, dtype=float), unit)


def make_dataset(n_hours=24 * 40, start=utc(2024, 1, 1), level=1000.0):
    """Small deterministic dataset with two future-known covariates."""
    k = np.arange(n_hours)
    load = level + 100.0 * np.sin(2 * np.pi * k / 24) + 10.0 * np.sin(2 * np.pi * k / 168)
    temp = 10.0 + 8.0 * np.sin(2 * np.pi * k / (24 * 30)) + 3.0 * np.sin(2 * np.pi * (k - 14) / 24)
    irr = np.maximum(0.0, 500.0 * np.sin(np.pi * ((k % 24) - 6) / 12)) * ((k % 24 >= 6) & (k % 24 <= 18))
    target = make_series(start, load)
    covs = {
        "temperature": cs.CovariateSeries(make_series(start, temp, "temperature", "degC"), True),
        "irradiance": cs.CovariateSeries(make_series(start, irr, "irradiance", "W/m2"), True),
    }
    return cs.Dataset(target=target, covariates=covs)


@pytest.fixture(scope="session")
def small_dataset():
    return make_dataset()


@pytest.fixture(scope="session")
def synthetic_dataset():
    return cs.generate_synthetic_dataset(seed=3, days=60)
