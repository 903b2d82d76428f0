"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints a PASS line on success; a failed criterion fails the
test. The real-data baseline criterion skips (not fails) when the
dataset file is absent.
"""

import math
import os
import threading
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest

import coalition_shap as cs
from conftest import HOUR, brute_force_shapley

RNG_SEED = 20250810


def report(name):
    print(f"ACCEPTANCE {name}: PASS")


class CountingWrapper(cs.Forecaster):
    """Delegates to a forecaster while counting predict calls."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def capabilities(self):
        return self.inner.capabilities

    def predict(self, masked):
        with self._lock:
            self.calls += 1
        return self.inner.predict(masked)


@pytest.fixture(scope="module")
def noisy_world():
    """Default planted effects with noise; linear model fitted on the head."""
    ds = cs.generate_synthetic_dataset(seed=101, days=120)
    boundary = ds.target.start + 80 * 24 * HOUR
    spec = cs.SplitSpec(boundary, boundary + 20 * 24 * HOUR, ds.target.end)
    model = cs.LinearCovariateForecaster().fit(cs.split(ds, spec)[0])
    return ds, model


@pytest.fixture(scope="module")
def planted_world():
    """Zero-noise synthetic with a quiet weekly profile; 48-week base window."""
    effects = cs.PlantedEffects(noise=0.0, weekly_amplitude=150.0)
    ds = cs.generate_synthetic_dataset(seed=11, days=500, effects=effects)
    boundary = ds.target.start + 330 * 24 * HOUR
    spec = cs.SplitSpec(boundary, boundary + 70 * 24 * HOUR, ds.target.end)
    recipe = cs.FeatureRecipe(hour_of_week=False)
    model = cs.LinearCovariateForecaster(recipe=recipe).fit(cs.split(ds, spec)[0])
    explainer = cs.ShapExplainer(model, base_window_hours=48 * 168)
    return ds, model, explainer, effects


def test_efficiency_axiom(noisy_world):
    """50 random explanations, N=7: per-hour |base + sum(shap) - full| <= 1e-9."""
    ds, model = noisy_world
    rng = np.random.default_rng(RNG_SEED)
    first = 85 * 24  # leave room for context and training
    last = len(ds.target) - 24
    origins = rng.choice(np.arange(first, last), size=50, replace=False)
    explainer = cs.ShapExplainer(model)
    started = time.perf_counter()
    for hour in origins:
        task = cs.ForecastTask(ds.target.start + int(hour) * HOUR, 720)
        expl = explainer.explain(ds, task)
        assert expl.spec.n_groups == 7
        residual = np.abs(expl.base + expl.shap.sum(axis=0) - expl.full)
        assert residual.max() <= 1e-9, f"efficiency residual {residual.max():.3e}"
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"50 explanations took {elapsed:.1f}s"
    report(f"efficiency-axiom (50 explanations in {elapsed:.1f}s)")


def test_oracle_exactness(planted_world):
    """Grouped SHAP of the additive oracle equals its analytic terms to 1e-9,
    cross-checked against brute-force enumeration of all 2^7 coalitions."""
    ds, _, _, _ = planted_world
    task = cs.ForecastTask(ds.target.start + 450 * 24 * HOUR, 720)
    spec = cs.default_grouping(ds, task)
    base_value = float(cs.base_prediction(ds, task, 720).median[0])
    oracle = cs.AdditiveOracle(
        spec,
        intercept=base_value,
        covariate_weights={"temperature": 2.0, "irradiance": -1.0, "holiday": -500.0},
    )

    table = cs.evaluate_coalitions(ds, task, spec, oracle)
    expl = cs.compute_shap(table)

    analytic = oracle.analytic_shap(ds, task, base_value)
    for i, name in enumerate(spec.group_names):
        assert np.abs(expl.shap[i] - analytic[name]).max() <= 1e-9, name
        # intercept == base here, so the value IS the group's own term
        assert abs(analytic[name] - oracle.analytic_terms(ds, task)[name]) <= 1e-9

    # Independent brute force: evaluate the masked value function directly
    # and apply the textbook formula over named players.
    names = spec.group_names
    base_vec = cs.base_prediction(ds, task, 720).median
    cache = {}

    def value_of(subset):
        code = sum(1 << names.index(p) for p in subset)
        if code not in cache:
            masked = cs.apply_coalition(ds, task, spec, code, oracle.capabilities)
            if isinstance(masked, cs.BaseSignal):
                cache[code] = base_vec
            else:
                cache[code] = cs.forecast(oracle, masked).median
        return cache[code]

    brute = brute_force_shapley(names, value_of)
    assert len(cache) == 128
    for i, name in enumerate(names):
        assert np.abs(expl.shap[i] - brute[name]).max() <= 1e-9, name
    report("oracle-exactness (analytic + 2^7 brute force)")


def test_permutation_equivalence():
    """100 randomized tables, N in {2..5}: weighted formula == N! oracle to 1e-9."""
    rng = np.random.default_rng(RNG_SEED)
    checked = 0
    for trial in range(100):
        n = int(rng.integers(2, 6))
        spec = cs.GroupingSpec(
            temporal_groups=(cs.TemporalGroup("t0", -24, -1),),
            covariate_groups=tuple(f"c{i}" for i in range(n - 1)),
        )
        task = cs.ForecastTask(datetime(2025, 1, 1, tzinfo=timezone.utc), 24, horizon_hours=4)
        values = rng.normal(0.0, 10.0, size=(1 << n, 4))
        table = cs.CoalitionTable(spec, task, values, "random", (1 << n) - 1, 1)
        diff = np.abs(cs.compute_shap(table).shap - cs.permutation_oracle(table))
        assert diff.max() <= 1e-9, f"trial {trial}: {diff.max():.3e}"
        checked += 1
    assert checked == 100
    report("permutation-equivalence (100 tables)")


def test_axiom_suite(planted_world):
    """Symmetry on duplicated covariates; null player on a zero-weight one."""
    ds, _, _, _ = planted_world
    task = cs.ForecastTask(ds.target.start + 460 * 24 * HOUR, 720)

    temp = ds.covariates["temperature"]
    covs = dict(ds.covariates)
    covs["temperature_twin"] = cs.CovariateSeries(
        cs.HourlySeries("temperature_twin", temp.series.start, temp.series.values, temp.series.unit),
        future_known=True,
    )
    twin_ds = cs.Dataset(target=ds.target, covariates=covs, holiday_calendar=ds.holiday_calendar)
    spec = cs.default_grouping(twin_ds, task)
    base_value = float(cs.base_prediction(twin_ds, task, 720).median[0])
    oracle = cs.AdditiveOracle(
        spec,
        intercept=base_value,
        covariate_weights={
            "temperature": 1.5,
            "temperature_twin": 1.5,
            "irradiance": -1.0,
            "holiday": 0.0,  # null player
        },
        temporal_weights={"last_day": 0.25},
    )
    table = cs.evaluate_coalitions(twin_ds, task, spec, oracle)
    expl = cs.compute_shap(table)

    i = expl.group_names.index("temperature")
    j = expl.group_names.index("temperature_twin")
    assert np.abs(expl.shap[i] - expl.shap[j]).max() <= 1e-9

    k = expl.group_names.index("holiday")
    assert np.abs(expl.shap[k]).max() == 0.0
    # table-level null check: presence of the holiday group never moves a value
    bit = 1 << k
    for c in cs.enumerate_coalitions(spec):
        if not c & bit and c != 0:
            assert np.array_equal(table.values[c | bit], table.values[c])
    report("axiom-suite (symmetry + null player)")


def test_evaluation_count(noisy_world):
    """4 temporal + 3 covariate groups: exactly 128 forecaster-or-base
    evaluations, and bit-identical results for 1 vs 8 workers."""
    ds, model = noisy_world
    task = cs.ForecastTask(ds.target.start + 110 * 24 * HOUR, 720)
    spec = cs.default_grouping(ds, task)
    assert spec.n_temporal == 4 and len(spec.covariate_groups) == 3

    counted = CountingWrapper(model)
    table1 = cs.evaluate_coalitions(ds, task, spec, counted, workers=1)
    assert counted.calls + table1.base_evaluations == 128
    assert counted.calls == table1.forecaster_calls

    counted8 = CountingWrapper(model)
    table8 = cs.evaluate_coalitions(ds, task, spec, counted8, workers=8)
    assert counted8.calls == counted.calls
    assert np.array_equal(table1.values, table8.values)
    assert np.array_equal(cs.compute_shap(table1).shap, cs.compute_shap(table8).shap)
    report(f"evaluation-count (128 = {table1.forecaster_calls} forecaster + {table1.base_evaluations} base)")


def test_masking_semantics(noisy_world):
    """All 128 coalitions: marker and row-drop forms expose identical observed
    pairs, and the oldest absent prefix is always realized as truncation."""
    ds, _ = noisy_world
    task = cs.ForecastTask(ds.target.start + 110 * 24 * HOUR, 720)
    spec = cs.default_grouping(ds, task)
    marker_caps = cs.Capabilities(accepts_missing_target=True, accepts_row_drop=False)
    drop_caps = cs.Capabilities(accepts_missing_target=False, accepts_row_drop=True)

    count = 0
    for coalition in cs.enumerate_coalitions(spec):
        marker = cs.apply_coalition(ds, task, spec, coalition, marker_caps)
        dropped = cs.apply_coalition(ds, task, spec, coalition, drop_caps)
        count += 1
        if isinstance(marker, cs.BaseSignal):
            assert isinstance(dropped, cs.BaseSignal)
            continue
        assert marker.observed_pairs() == dropped.observed_pairs()
        for masked in (marker, dropped):
            if len(masked) == 0:
                continue
            assert not np.isnan(masked.values[0])
            first_present = next(i for i in range(spec.n_temporal) if coalition >> i & 1)
            assert int(masked.offsets[0]) == spec.temporal_groups[first_present].oldest
    assert count == 128
    report("masking-semantics (128 coalitions, both strategies)")


def test_metric_formulas():
    """Unit cases plus MAE <= RMSE on 1000 random vectors."""
    assert cs.mae([100.0], [110.0]) == 10.0
    assert cs.rmse([100.0], [110.0]) == 10.0
    assert cs.mape([100.0], [110.0]) == pytest.approx(10.0)
    assert cs.rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(cs.DataError):
        cs.mape([0.0, 0.0], [3.0, 4.0])
    y = [123.0, 456.0]
    assert cs.mae(y, y) == cs.rmse(y, y) == cs.mape(y, y) == 0.0

    rng = np.random.default_rng(RNG_SEED)
    for _ in range(1000):
        n = int(rng.integers(1, 64))
        actual = rng.normal(0, 100, n)
        predicted = actual + rng.normal(0, 25, n)
        assert cs.mae(actual, predicted) <= cs.rmse(actual, predicted) + 1e-12
    report("metric-formulas (unit cases + 1000 random vectors)")


PAPER_DATA = Path(os.environ.get("COALITION_SHAP_PAPER_DATA", "data/entsoe"))


def test_baseline_reproduction():
    """Day-type baseline on the paper's load data and test year, stride 1:
    MAE 325.9 MW, RMSE 451.2 MW, MAPE 5.24 % within +-2 % relative."""
    load_csv = PAPER_DATA / "load.csv"
    holidays_txt = PAPER_DATA / "holidays.txt"
    if not load_csv.exists():
        print("ACCEPTANCE baseline-reproduction: SKIPPED (dataset file absent)")
        pytest.skip(f"paper dataset not present at {load_csv}")
    target = cs.ingest_load_csv(load_csv)
    calendar = cs.read_holiday_calendar(holidays_txt) if holidays_txt.exists() else frozenset()
    dataset = cs.Dataset(target=target, holiday_calendar=calendar)
    model = cs.DayTypeBaseline(calendar, tz="Europe/Berlin")
    start = datetime(2024, 10, 1, tzinfo=timezone.utc)
    end = datetime(2025, 10, 1, tzinfo=timezone.utc)
    result = cs.rolling_evaluation(
        dataset, model, context_hours=24 * 70, stride_hours=1, start=start, end=end
    )
    r = result.report
    assert r.mae == pytest.approx(325.9, rel=0.02)
    assert r.rmse == pytest.approx(451.2, rel=0.02)
    assert r.mape == pytest.approx(5.24, rel=0.02)
    report(f"baseline-reproduction (MAE {r.mae:.1f}, RMSE {r.rmse:.1f}, MAPE {r.mape:.2f}%)")


def test_planted_effect_explanations(planted_world):
    """Zero-noise data, fitted linear forecaster: holiday SHAP negative on
    every planted holiday hour; temperature SHAP sign opposes the 24h
    temperature delta below the 15 degC threshold (deltas >= 1 degC)."""
    ds, _, explainer, effects = planted_world
    tser = ds.covariates["temperature"].series

    holiday_origins = [
        datetime(d.year, d.month, d.day, tzinfo=timezone.utc)
        for d in sorted(ds.holiday_calendar)
    ]
    holiday_origins = [
        o for o in holiday_origins
        if o - 720 * HOUR >= ds.target.start and o + 24 * HOUR <= ds.target.end
    ]
    assert holiday_origins, "no usable planted holidays"
    regular_origins = [ds.target.start + d * 24 * HOUR for d in range(400, 499, 2)]

    checked_temp = 0
    for origin in holiday_origins + regular_origins:
        expl = explainer.explain(ds, cs.ForecastTask(origin, 720))
        if origin in holiday_origins:
            holiday_shap = expl.shap_for("holiday")
            assert (holiday_shap < 0).all(), f"holiday SHAP not negative at {origin}"
        temp_shap = expl.shap_for("temperature")
        for h in range(24):
            ts = origin + h * HOUR
            t_now = tser.values[tser.index_of(ts)]
            t_prev = tser.values[tser.index_of(ts - 24 * HOUR)]
            delta = t_now - t_prev
            if (
                t_now < effects.heating_threshold_c
                and t_prev < effects.heating_threshold_c
                and abs(delta) >= 1.0
            ):
                checked_temp += 1
                assert np.sign(temp_shap[h]) == -np.sign(delta), (
                    f"temperature SHAP {temp_shap[h]:.2f} does not oppose "
                    f"delta {delta:.2f} at {ts}"
                )
    assert checked_temp > 100
    report(
        f"planted-effect-explanations ({len(holiday_origins)} holidays, "
        f"{checked_temp} cold-delta hours)"
    )


def test_importance_normalization(planted_world):
    """Importance percentages sum to 100 +- 1e-6 on every explanation set.
    Table 1/3 TSFM numbers are NOT reproducible here: they need the
    secondary adapter and GPU-scale inference."""
    ds, _, explainer, _ = planted_world
    explanations = []
    for day in range(470, 480):
        origin = ds.target.start + day * 24 * HOUR
        explanations.append(explainer.explain(ds, cs.ForecastTask(origin, 720)))
    for subset in (explanations[:1], explanations[:3], explanations):
        table = cs.global_importance(subset)
        assert abs(sum(table.percent) - 100.0) <= 1e-6
        assert all(p >= 0 for p in table.percent)
    report("importance-normalization (sums to 100 +- 1e-6)")
