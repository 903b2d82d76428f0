"""Run configuration: YAML tree -> dataset, split, forecaster, grouping."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import yaml

from .builtin import DayTypeBaseline, FeatureRecipe, LinearCovariateForecaster, SeasonalNaive
from .errors import ConfigError, DataError
from .forecast import Capabilities, Forecaster
from .grouping import GroupingSpec
from .ingest import (
    build_holiday_covariate,
    ingest_load_csv,
    ingest_weather_csv,
    parse_timestamp,
    read_holiday_calendar,
)
from .series import Dataset, SplitSpec, split
from .synthetic import PlantedEffects, generate_synthetic_dataset
from .wire import HttpForecaster, SubprocessForecaster


@dataclass
class RunConfig:
    load_csv: str | None = None
    weather_csv: str | None = None
    holiday_calendar: str | None = None
    timezone: str = "UTC"
    train_end: datetime | None = None
    val_end: datetime | None = None
    test_end: datetime | None = None
    forecaster: str = "baseline"
    context_hours: int = 720
    base_window_hours: int | None = None
    horizon_hours: int = 24
    covariates: tuple[str, ...] | None = None
    grouping: dict | None = None
    output_dir: str = "out"
    seed: int = 0
    workers: int | None = None  # None -> available parallelism
    ridge_penalty: float = 1e-6
    seasonal_period_hours: int = 168
    external_capabilities: dict | None = None
    synthetic: dict | None = None
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            tree = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(tree, dict):
            raise ConfigError(f"{path}: config must be a mapping")

        cfg = cls(base_dir=path.parent)
        data = tree.get("data", {})
        cfg.load_csv = data.get("load_csv")
        cfg.weather_csv = data.get("weather_csv")
        cfg.holiday_calendar = data.get("holiday_calendar")
        cfg.timezone = tree.get("timezone", "UTC")
        split_tree = tree.get("split", {})
        for key in ("train_end", "val_end", "test_end"):
            if key in split_tree:
                setattr(cfg, key, parse_timestamp(str(split_tree[key])))
        for key in (
            "forecaster",
            "context_hours",
            "base_window_hours",
            "horizon_hours",
            "output_dir",
            "seed",
            "workers",
            "ridge_penalty",
            "seasonal_period_hours",
            "grouping",
            "external_capabilities",
            "synthetic",
        ):
            if key in tree and tree[key] is not None:
                setattr(cfg, key, tree[key])
        if "covariates" in tree and tree["covariates"] is not None:
            cfg.covariates = tuple(tree["covariates"])
        return cfg

    def resolve(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else self.base_dir / p

    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return os.cpu_count() or 1

    def split_spec(self) -> SplitSpec | None:
        if self.train_end and self.val_end and self.test_end:
            return SplitSpec(self.train_end, self.val_end, self.test_end)
        if any((self.train_end, self.val_end, self.test_end)):
            raise ConfigError("split requires all of train_end, val_end, test_end")
        return None

    def grouping_spec(self) -> GroupingSpec | None:
        if self.grouping is None:
            return None
        try:
            return GroupingSpec.from_dict(self.grouping)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad grouping override: {exc}") from exc


def build_dataset(cfg: RunConfig) -> Dataset:
    """Assemble the dataset from config: synthetic spec or ingested files."""
    if cfg.synthetic is not None:
        spec = dict(cfg.synthetic)
        effects_keys = {f for f in PlantedEffects.__dataclass_fields__}
        effects = PlantedEffects(**{k: v for k, v in spec.items() if k in effects_keys})
        dataset = generate_synthetic_dataset(
            seed=int(spec.get("seed", cfg.seed)),
            days=int(spec.get("days", 120)),
            effects=effects,
            tz=cfg.timezone,
        )
    else:
        if not cfg.load_csv:
            raise ConfigError("config names no load_csv and no synthetic block")
        target = ingest_load_csv(cfg.resolve(cfg.load_csv))
        covariates = {}
        if cfg.weather_csv:
            covariates.update(ingest_weather_csv(cfg.resolve(cfg.weather_csv)))
        calendar = frozenset()
        if cfg.holiday_calendar:
            calendar = read_holiday_calendar(cfg.resolve(cfg.holiday_calendar))
        covariates["holiday"] = build_holiday_covariate(
            calendar, target.start, len(target), cfg.timezone
        )
        dataset = Dataset(target=target, covariates=covariates, holiday_calendar=calendar)

    wanted = cfg.covariates if cfg.covariates is not None else dataset.covariate_names()
    keep = {name: cov for name, cov in dataset.covariates.items() if name in wanted}
    missing = set(wanted) - set(keep)
    if missing:
        raise ConfigError(f"configured covariates not available: {sorted(missing)}")
    return Dataset(target=dataset.target, covariates=keep, holiday_calendar=dataset.holiday_calendar)


def external_capabilities(cfg: RunConfig) -> Capabilities | None:
    if cfg.external_capabilities is None:
        return None
    try:
        return Capabilities(**cfg.external_capabilities)
    except TypeError as exc:
        raise ConfigError(f"bad external_capabilities: {exc}") from exc


def make_forecaster(cfg: RunConfig, dataset: Dataset) -> Forecaster:
    """Resolve the configured forecaster; linear models are fitted here.

    The linear model fits on the training split when one is configured,
    otherwise on the whole dataset (fine for synthetic demos, leaky for
    real evaluations).
    """
    name = cfg.forecaster
    if name.startswith("exec:"):
        return SubprocessForecaster(name[len("exec:"):], capabilities=external_capabilities(cfg))
    if name.startswith("http:") and not name.startswith(("http://", "https://")):
        return HttpForecaster(name[len("http:"):], capabilities=external_capabilities(cfg))
    if name.startswith(("http://", "https://")):
        return HttpForecaster(name, capabilities=external_capabilities(cfg))
    if name == "baseline":
        return DayTypeBaseline(dataset.holiday_calendar, tz=cfg.timezone)
    if name == "seasonal-naive":
        return SeasonalNaive(cfg.seasonal_period_hours)
    if name == "linear":
        model = LinearCovariateForecaster(
            recipe=FeatureRecipe(), ridge_penalty=cfg.ridge_penalty, tz=cfg.timezone
        )
        spec = cfg.split_spec()
        train = split(dataset, spec)[0] if spec else dataset
        try:
            return model.fit(train)
        except DataError as exc:
            raise DataError(f"fitting the linear forecaster failed: {exc}") from exc
    raise ConfigError(f"unknown forecaster {name!r}")
