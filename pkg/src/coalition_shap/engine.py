"""Exact grouped Shapley values over cached coalition forecasts.

Every coalition is evaluated exactly once; the 2^N median vectors form a
table, and per-hour SHAP values are aggregated from it with exact rational
weights. An N!-permutation oracle provides an independent cross-check for
small N.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, EfficiencyViolation, ForecasterError
from .forecast import Forecaster, ParamsMixin, base_prediction, forecast
from .grouping import BaseSignal, GroupingSpec, apply_coalition, enumerate_coalitions
from .ingest import parse_timestamp
from .series import Dataset, ForecastTask


# Efficiency tolerances: built-in deterministic forecasters are exact up to
# float rounding; wire-bridged ones round-trip through text encoding.
TOL_BUILTIN_ABS = 1e-9
TOL_WIRE_REL = 1e-6


def shapley_weight(s: int, n_groups: int) -> float:
    """Weight of a coalition of size s among n_groups players: (N-1-s)! s! / N!.

    Computed as an exact reduced rational before the single float rounding,
    so factorial overflow cannot occur for any permitted N.
    """
    if not 0 <= s <= n_groups - 1:
        raise DataError(f"coalition size {s} out of range for {n_groups} groups")
    frac = Fraction(math.factorial(n_groups - 1 - s) * math.factorial(s), math.factorial(n_groups))
    return float(frac)


@dataclass(frozen=True)
class CoalitionTable:
    """All 2^N coalition forecasts for one task.

    values[c] is the median vector of coalition c; row 0 holds the base
    vector. forecaster_calls + base_evaluations == 2^N always.
    """

    spec: GroupingSpec
    task: ForecastTask
    values: np.ndarray
    forecaster_name: str
    forecaster_calls: int
    base_evaluations: int
    tolerance_kind: str = "abs"
    tolerance: float = TOL_BUILTIN_ABS

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = (1 << self.spec.n_groups, self.task.horizon_hours)
        if values.shape != expected:
            raise DataError(f"coalition table shape {values.shape}, expected {expected}")
        if not np.isfinite(values).all():
            raise DataError("coalition table contains non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Explanation:
    """Base vector, full-prediction vector, and the N x H SHAP matrix."""

    task: ForecastTask
    spec: GroupingSpec
    base: np.ndarray
    full: np.ndarray
    shap: np.ndarray
    evaluations: int
    base_evaluations: int = 0
    forecaster_name: str = ""

    @property
    def group_names(self) -> tuple[str, ...]:
        return self.spec.group_names

    def shap_for(self, group: str) -> np.ndarray:
        return self.shap[self.group_names.index(group)]


def evaluate_coalitions(
    dataset: Dataset,
    task: ForecastTask,
    spec: GroupingSpec,
    forecaster: Forecaster,
    base_window_hours: int | None = None,
    workers: int = 1,
) -> CoalitionTable:
    """Evaluate every coalition exactly once and cache the median vectors.

    BaseSignal coalitions (and empty-target inputs the forecaster refuses)
    are filled from the base prediction. Evaluation order and parallelism
    degree cannot change the result: outputs land in their coalition's slot
    and each input is a pure function of the coalition.
    """
    caps = forecaster.capabilities
    if base_window_hours is None:
        base_window_hours = task.context_length_hours
    base = base_prediction(dataset, task, base_window_hours).median

    coalitions = enumerate_coalitions(spec)
    inputs = {}
    routed_to_base = []
    for c in coalitions:
        masked = apply_coalition(dataset, task, spec, c, caps)
        if isinstance(masked, BaseSignal) or (len(masked) == 0 and not caps.accepts_empty_target):
            routed_to_base.append(c)
        else:
            inputs[c] = masked

    values = np.empty((len(coalitions), task.horizon_hours))
    for c in routed_to_base:
        values[c] = base

    def run(c: int) -> None:
        try:
            values[c] = forecast(forecaster, inputs[c]).median
        except ForecasterError as exc:
            raise ForecasterError(f"coalition {spec.members(c)} (encoding {c}): {exc}") from exc

    if workers > 1 and not caps.serial_only:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(run, c) for c in inputs]:
                future.result()
    else:
        for c in inputs:
            run(c)

    wire_bridged = bool(getattr(forecaster, "wire_bridged", False))
    if wire_bridged or not caps.deterministic:
        kind, tol = "rel", TOL_WIRE_REL
    else:
        kind, tol = "abs", TOL_BUILTIN_ABS
    return CoalitionTable(
        spec=spec,
        task=task,
        values=values,
        forecaster_name=forecaster.name,
        forecaster_calls=len(inputs),
        base_evaluations=len(routed_to_base),
        tolerance_kind=kind,
        tolerance=tol,
    )


def compute_shap(table: CoalitionTable) -> Explanation:
    """Aggregate the coalition table into per-group, per-hour SHAP values.

    shap[g][h] = sum over S not containing g of w(|S|) (v(S+g)[h] - v(S)[h]).
    The per-hour efficiency identity base + sum(shap) = full is enforced at
    the table's tolerance; a violation means the forecaster was not the
    pure function it claimed to be.
    """
    n = table.spec.n_groups
    values = table.values
    sizes = np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)
    weights = np.array([shapley_weight(s, n) for s in range(n)]) if n else np.empty(0)

    shap = np.zeros((n, table.task.horizon_hours))
    all_coalitions = np.arange(1 << n)
    for g in range(n):
        bit = 1 << g
        without = all_coalitions[(all_coalitions & bit) == 0]
        w = weights[sizes[without]]
        shap[g] = w @ (values[without | bit] - values[without])

    base = values[0]
    full = values[-1]
    residual = np.abs(base + shap.sum(axis=0) - full)
    if table.tolerance_kind == "rel":
        bound = table.tolerance * np.maximum(1.0, np.abs(full))
    else:
        bound = np.full_like(full, table.tolerance)
    if (residual > bound).any():
        worst = int(residual.argmax())
        raise EfficiencyViolation(
            f"efficiency violated at horizon hour {worst}: residual {residual[worst]:.3e} "
            f"exceeds {table.tolerance_kind} tolerance {table.tolerance:.1e} "
            f"(forecaster {table.forecaster_name!r}, origin {table.task.origin.isoformat()})"
        )
    return Explanation(
        task=table.task,
        spec=table.spec,
        base=base,
        full=full,
        shap=shap,
        evaluations=table.forecaster_calls,
        base_evaluations=table.base_evaluations,
        forecaster_name=table.forecaster_name,
    )


def permutation_oracle(table: CoalitionTable) -> np.ndarray:
    """Average marginal contribution over all N! orderings; test fixture.

    Independent of the weighted-subset formula; feasible for N <= 8 only.
    """
    n = table.spec.n_groups
    if n > 8:
        raise DataError(f"permutation oracle enumerates N! orderings; N={n} is too large")
    values = table.values
    shap = np.zeros((n, table.task.horizon_hours))
    count = 0
    for order in permutations(range(n)):
        coalition = 0
        for g in order:
            grown = coalition | (1 << g)
            shap[g] += values[grown] - values[coalition]
            coalition = grown
        count += 1
    return shap / count


class ShapExplainer(ParamsMixin):
    """Convenience front end: evaluate the coalitions of a task and aggregate.

    The coalition table of the last explain() call is kept on `table_` so
    analytics can be recomputed without re-forecasting.
    """

    def __init__(
        self,
        forecaster: Forecaster,
        grouping: GroupingSpec | None = None,
        base_window_hours: int | None = None,
        workers: int = 1,
    ):
        self.forecaster = forecaster
        self.grouping = grouping
        self.base_window_hours = base_window_hours
        self.workers = workers
        self.table_: CoalitionTable | None = None

    def explain(self, dataset: Dataset, task: ForecastTask) -> Explanation:
        from .grouping import default_grouping

        spec = self.grouping or default_grouping(dataset, task)
        table = evaluate_coalitions(
            dataset,
            task,
            spec,
            self.forecaster,
            base_window_hours=self.base_window_hours,
            workers=self.workers,
        )
        self.table_ = table
        return compute_shap(table)


def _task_meta(task: ForecastTask) -> dict:
    return {
        "origin": task.origin.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "context_length_hours": task.context_length_hours,
        "horizon_hours": task.horizon_hours,
        "quantiles": list(task.quantiles),
    }


def _task_from_meta(meta: dict) -> ForecastTask:
    return ForecastTask(
        origin=parse_timestamp(meta["origin"]),
        context_length_hours=int(meta["context_length_hours"]),
        horizon_hours=int(meta["horizon_hours"]),
        quantiles=tuple(meta.get("quantiles", (0.5,))),
    )


def save_explanation(explanation: Explanation, path: str | Path) -> None:
    body = {
        "task": _task_meta(explanation.task),
        "grouping": explanation.spec.to_dict(),
        "forecaster": explanation.forecaster_name,
        "evaluations": explanation.evaluations,
        "base_evaluations": explanation.base_evaluations,
        "base": explanation.base.tolist(),
        "full": explanation.full.tolist(),
        "shap": {name: explanation.shap[i].tolist() for i, name in enumerate(explanation.group_names)},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, indent=1))


def load_explanation(path: str | Path) -> Explanation:
    body = json.loads(Path(path).read_text())
    spec = GroupingSpec.from_dict(body["grouping"])
    shap = np.array([body["shap"][name] for name in spec.group_names])
    return Explanation(
        task=_task_from_meta(body["task"]),
        spec=spec,
        base=np.asarray(body["base"]),
        full=np.asarray(body["full"]),
        shap=shap,
        evaluations=int(body["evaluations"]),
        base_evaluations=int(body.get("base_evaluations", 0)),
        forecaster_name=body.get("forecaster", ""),
    )


def save_table(table: CoalitionTable, path: str | Path) -> None:
    body = {
        "task": _task_meta(table.task),
        "grouping": table.spec.to_dict(),
        "forecaster": table.forecaster_name,
        "forecaster_calls": table.forecaster_calls,
        "base_evaluations": table.base_evaluations,
        "tolerance_kind": table.tolerance_kind,
        "tolerance": table.tolerance,
        "values": table.values.tolist(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body))


def load_table(path: str | Path) -> CoalitionTable:
    body = json.loads(Path(path).read_text())
    return CoalitionTable(
        spec=GroupingSpec.from_dict(body["grouping"]),
        task=_task_from_meta(body["task"]),
        values=np.asarray(body["values"]),
        forecaster_name=body.get("forecaster", ""),
        forecaster_calls=int(body["forecaster_calls"]),
        base_evaluations=int(body["base_evaluations"]),
        tolerance_kind=body.get("tolerance_kind", "abs"),
        tolerance=float(body.get("tolerance", TOL_BUILTIN_ABS)),
    )


def export_shap_csv(explanations: Sequence[Explanation], path: str | Path) -> None:
    """Long-form export: origin,horizon_hour,group,shap_value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin", "horizon_hour", "group", "shap_value"])
        for expl in explanations:
            origin = expl.task.origin.strftime("%Y-%m-%dT%H:%M:%SZ")
            for h in range(expl.task.horizon_hours):
                for i, name in enumerate(expl.group_names):
                    writer.writerow([origin, h, name, repr(float(expl.shap[i, h]))])
