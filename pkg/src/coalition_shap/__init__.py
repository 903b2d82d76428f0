"""Exact grouped SHAP explanations for covariate-informed time-series forecasters.

Forecasters declare which masked-input shapes they tolerate; the engine
evaluates every coalition of temporal windows and covariates exactly once
and aggregates per-hour Shapley values with exact weights.
"""

from .analytics import (
    DependenceTable,
    ImportanceTable,
    LocalReport,
    RollingEvaluation,
    dependence_table,
    global_importance,
    local_report,
    rolling_evaluation,
)
from .builtin import (
    AdditiveOracle,
    DayType,
    DayTypeBaseline,
    FeatureRecipe,
    LinearCovariateForecaster,
    SeasonalNaive,
    day_type,
    daytype_baseline,
    seasonal_naive,
)
from . import engine, grouping, series, synthetic
from .engine import (
    CoalitionTable,
    Explanation,
    ShapExplainer,
    compute_shap,
    evaluate_coalitions,
    export_shap_csv,
    load_explanation,
    load_table,
    permutation_oracle,
    save_explanation,
    save_table,
    shapley_weight,
)
from .errors import (
    CapabilityViolation,
    CoalitionShapError,
    ConfigError,
    DataError,
    EfficiencyViolation,
    ForecasterError,
    WireProtocolError,
)
from .forecast import (
    Capabilities,
    Forecaster,
    ForecastOutput,
    MaskedInput,
    base_prediction,
    check_forecast_output,
    check_masked_input,
    forecast,
    full_input,
)
from .grouping import (
    BaseSignal,
    GroupingSpec,
    TemporalGroup,
    apply_coalition,
    coalition_size,
    default_grouping,
    enumerate_coalitions,
)
from .ingest import (
    build_holiday_covariate,
    ingest_hourly_csv,
    ingest_load_csv,
    ingest_weather_csv,
    read_holiday_calendar,
    write_series_csv,
)
from .metrics import MetricReport, compute_metrics, mae, mape, rmse
from .series import (
    CovariateSeries,
    CovariateSlice,
    Dataset,
    ForecastTask,
    HourlySeries,
    SplitSpec,
    slice_context,
    split,
)
from .synthetic import PlantedEffects, generate_synthetic_dataset
from .wire import (
    HttpForecaster,
    SubprocessForecaster,
    decode_request,
    decode_response,
    encode_error,
    encode_request,
    encode_response,
    wire_decode,
    wire_encode,
)

__version__ = "0.1.0"
