"""Command-line surface: ingest, evaluate, explain, report, synth.

Exit codes: 0 success, 1 usage/config, 2 data error, 3 forecaster error,
4 efficiency violation. COALITION_SHAP_LOG sets the logging level.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from datetime import timezone
from pathlib import Path
from zoneinfo import ZoneInfo

from . import analytics
from .config import RunConfig, build_dataset, make_forecaster
from .engine import (
    ShapExplainer,
    compute_shap,
    evaluate_coalitions,
    export_shap_csv,
    load_explanation,
    save_explanation,
    save_table,
)
from .errors import (
    ConfigError,
    DataError,
    EfficiencyViolation,
    ForecasterError,
)
from .grouping import default_grouping
from .ingest import parse_timestamp, write_series_csv
from .series import HOUR, ForecastTask

log = logging.getLogger("coalition_shap")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FORECASTER = 3
EXIT_EFFICIENCY = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else cfg.resolve(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(cfg: RunConfig, args) -> int:
    dataset = build_dataset(cfg)
    out = _out_dir(cfg, args.out)
    manifest = {"series": {}}
    entries = [("load", dataset.target)]
    entries += [(name, cov.series) for name, cov in dataset.covariates.items()]
    for name, series in entries:
        path = out / f"{name}.csv"
        write_series_csv(path, [series])
        manifest["series"][name] = {
            "path": path.name,
            "sha256": _sha256(path),
            "rows": len(series),
            "start": series.start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "unit": series.unit,
        }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    print(f"ingested {len(entries)} series -> {out}/manifest.json")
    return EXIT_OK


def _evaluation_window(cfg: RunConfig, dataset):
    spec = cfg.split_spec()
    if spec:
        return spec.val_end, spec.test_end
    return None, None


def cmd_evaluate(cfg: RunConfig, args) -> int:
    dataset = build_dataset(cfg)
    out = _out_dir(cfg, args.out)
    start, end = _evaluation_window(cfg, dataset)
    sweep = [int(c) for c in args.context_sweep.split(",")] if args.context_sweep else None

    def run(context_hours):
        forecaster = make_forecaster(cfg, dataset)
        return forecaster, analytics.rolling_evaluation(
            dataset,
            forecaster,
            context_hours,
            stride_hours=args.stride,
            horizon_hours=cfg.horizon_hours,
            start=start,
            end=end,
        )

    if sweep:
        path = out / "metrics_sweep.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "stride", "context_hours", "mae", "rmse", "mape", "n"])
            for context_hours in sweep:
                forecaster, result = run(context_hours)
                r = result.report
                writer.writerow([forecaster.name, args.stride, context_hours, f"{r.mae:.6f}", f"{r.rmse:.6f}", f"{r.mape:.6f}", r.n])
                print(f"{forecaster.name} context={context_hours}h: MAE {r.mae:.1f} RMSE {r.rmse:.1f} MAPE {r.mape:.2f}% (n={r.n})")
        print(f"wrote {path}")
        return EXIT_OK

    forecaster, result = run(args.context_hours or cfg.context_hours)
    r = result.report
    path = out / "metrics.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "stride", "mae", "rmse", "mape", "n"])
        writer.writerow([forecaster.name, args.stride, f"{r.mae:.6f}", f"{r.rmse:.6f}", f"{r.mape:.6f}", r.n])
    lead_path = out / "metrics_per_lead.csv"
    with lead_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "stride", "lead", "mae", "rmse", "mape", "n"])
        for lead, lr in enumerate(result.per_lead):
            writer.writerow([forecaster.name, args.stride, lead, f"{lr.mae:.6f}", f"{lr.rmse:.6f}", f"{lr.mape:.6f}", lr.n])
    print(f"{forecaster.name}: MAE {r.mae:.1f} MW, RMSE {r.rmse:.1f} MW, MAPE {r.mape:.2f}% (n={r.n})")
    print(f"wrote {path} and {lead_path}")
    return EXIT_OK


def _midnight_origins(cfg: RunConfig, dataset):
    """Local midnights inside the test window (or the whole usable span)."""
    zone = ZoneInfo(cfg.timezone)
    start, end = _evaluation_window(cfg, dataset)
    if start is None:
        start = dataset.target.start + cfg.context_hours * HOUR
        end = dataset.target.end
    origins = []
    ts = start
    while ts + cfg.horizon_hours * HOUR <= end:
        if ts.astimezone(zone).hour == 0:
            origins.append(ts)
            # DST days are 23 or 25 hours long; jump short and rescan
            ts = ts + 23 * HOUR
        else:
            ts = ts + HOUR
    return origins


def cmd_explain(cfg: RunConfig, args) -> int:
    dataset = build_dataset(cfg)
    out = _out_dir(cfg, args.out)
    if args.origins == "midnights":
        origins = _midnight_origins(cfg, dataset)
        if args.limit:
            origins = origins[: args.limit]
    else:
        origins = [parse_timestamp(t) for t in args.origins.split(",") if t.strip()]
    if not origins:
        print("no origins requested; nothing to do")
        return EXIT_OK

    forecaster = make_forecaster(cfg, dataset)
    context_hours = args.context_hours or cfg.context_hours
    grouping = cfg.grouping_spec()
    (out / "explanations").mkdir(exist_ok=True)
    (out / "tables").mkdir(exist_ok=True)
    for origin in origins:
        task = ForecastTask(origin, context_hours, cfg.horizon_hours)
        spec = grouping or default_grouping(dataset, task)
        started = time.perf_counter()
        table = evaluate_coalitions(
            dataset,
            task,
            spec,
            forecaster,
            base_window_hours=cfg.base_window_hours,
            workers=args.workers or cfg.effective_workers(),
        )
        explanation = compute_shap(table)
        elapsed = time.perf_counter() - started
        stamp = origin.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        save_explanation(explanation, out / "explanations" / f"{stamp}.json")
        save_table(table, out / "tables" / f"{stamp}.json")
        total = table.forecaster_calls + table.base_evaluations
        print(
            f"{origin.isoformat()}: {total} evaluations "
            f"({table.forecaster_calls} forecaster, {table.base_evaluations} base), "
            f"N={spec.n_groups}, {elapsed:.2f}s"
        )
    print(f"wrote {len(origins)} explanations -> {out}/explanations")
    return EXIT_OK


def _load_explanations(out: Path):
    paths = sorted((out / "explanations").glob("*.json"))
    if not paths:
        raise DataError(f"no explanation files under {out}/explanations; run `explain` first")
    return [load_explanation(p) for p in paths]


def cmd_report(cfg: RunConfig, args) -> int:
    dataset = build_dataset(cfg)
    out = _out_dir(cfg, args.out)
    explanations = _load_explanations(out)

    if args.kind == "importance":
        table = analytics.global_importance(explanations)
        path = out / "importance.csv"
        table.write_csv(path)
        for g, p in zip(table.groups, table.percent):
            print(f"{g:>14s}: {p:6.2f} %")
        print(f"wrote {path}")
    elif args.kind == "dependence":
        if not args.group:
            raise ConfigError("report --kind dependence requires --group")
        interaction = "day_category" if args.group == "holiday" else "hour"
        table = analytics.dependence_table(
            explanations, dataset, args.group, interaction=interaction, tz=cfg.timezone
        )
        path = out / f"dependence_{args.group}.csv"
        table.write_csv(path)
        print(f"wrote {path} ({len(table.rows)} rows)")
    elif args.kind == "local":
        if args.month:
            year, month = (int(p) for p in args.month.split("-"))
            start = parse_timestamp(f"{year:04d}-{month:02d}-01T00:00:00Z")
            end = parse_timestamp(
                f"{year + (month == 12):04d}-{month % 12 + 1:02d}-01T00:00:00Z"
            )
        else:
            start = min(e.task.origin for e in explanations)
            end = max(e.task.origin + e.task.horizon_hours * HOUR for e in explanations)
        report = analytics.local_report(explanations, dataset, start, end)
        path = out / "local.csv"
        report.write_csv(path)
        charts = analytics.render_monthly_charts(report, out / "charts")
        export_shap_csv(explanations, out / "shap_long.csv")
        print(f"wrote {path}, {len(charts)} chart(s) under {out}/charts")
    else:
        raise ConfigError(f"unknown report kind {args.kind!r}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args) -> int:
    """Materialize a synthetic dataset in the raw input formats."""
    from .synthetic import PlantedEffects, generate_synthetic_dataset

    effects = PlantedEffects(noise=args.noise)
    seed = args.synth_seed if args.synth_seed is not None else cfg.seed
    dataset = generate_synthetic_dataset(seed=seed, days=args.days, effects=effects, tz=cfg.timezone)
    out = _out_dir(cfg, args.out)

    load_path = out / "load.csv"
    with load_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "load_mw"])
        t = dataset.target
        for k, v in enumerate(t.values):
            writer.writerow([(t.start + k * HOUR).strftime("%Y-%m-%dT%H:%M:%SZ"), repr(float(v))])
    weather_path = out / "weather.csv"
    temp = dataset.covariates["temperature"].series
    irr = dataset.covariates["irradiance"].series
    with weather_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "temperature_c", "irradiance_wm2"])
        for k in range(len(temp)):
            writer.writerow(
                [
                    (temp.start + k * HOUR).strftime("%Y-%m-%dT%H:%M:%SZ"),
                    repr(float(temp.values[k])),
                    repr(float(irr.values[k])),
                ]
            )
    holiday_path = out / "holidays.txt"
    holiday_path.write_text(
        "# synthetic holiday calendar\n"
        + "".join(f"{d.isoformat()}\n" for d in sorted(dataset.holiday_calendar))
    )
    print(f"wrote {load_path}, {weather_path}, {holiday_path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="coalition-shap", description=__doc__)
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--workers", type=int, help="override the worker count", dest="global_workers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="ingest raw files into a canonical bundle")
    p_ingest.add_argument("--out", help="output directory (default: config output_dir)")

    p_eval = sub.add_parser("evaluate", help="rolling evaluation metrics")
    p_eval.add_argument("--forecaster", help="override the configured forecaster")
    p_eval.add_argument("--stride", type=int, default=1)
    p_eval.add_argument("--context-hours", type=int)
    p_eval.add_argument("--context-sweep", help="comma-separated context lengths")
    p_eval.add_argument("--out")

    p_explain = sub.add_parser("explain", help="grouped SHAP explanations per origin")
    p_explain.add_argument("--forecaster")
    p_explain.add_argument("--origins", default="midnights", help='"midnights" or comma-separated ISO timestamps')
    p_explain.add_argument("--limit", type=int, help="cap the number of midnight origins")
    p_explain.add_argument("--context-hours", type=int)
    p_explain.add_argument("--workers", type=int)
    p_explain.add_argument("--out")

    p_report = sub.add_parser("report", help="analytics over saved explanations")
    p_report.add_argument("--kind", required=True, choices=["importance", "dependence", "local"])
    p_report.add_argument("--group", help="covariate group for dependence reports")
    p_report.add_argument("--month", help="YYYY-MM window for local reports")
    p_report.add_argument("--out")

    p_synth = sub.add_parser("synth", help="write a synthetic dataset in raw input formats")
    p_synth.add_argument("--seed", type=int, dest="synth_seed")
    p_synth.add_argument("--days", type=int, default=120)
    p_synth.add_argument("--noise", type=float, default=50.0)
    p_synth.add_argument("--out")

    return parser


def main(argv=None) -> int:
    level = os.environ.get("COALITION_SHAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_yaml(args.config) if args.config else RunConfig()
        if getattr(args, "forecaster", None):
            cfg.forecaster = args.forecaster
        if args.seed is not None:
            cfg.seed = args.seed
        if args.global_workers is not None:
            cfg.workers = args.global_workers
        handler = {
            "ingest": cmd_ingest,
            "evaluate": cmd_evaluate,
            "explain": cmd_explain,
            "report": cmd_report,
            "synth": cmd_synth,
        }[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EfficiencyViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_EFFICIENCY
    except ForecasterError as exc:
        print(f"forecaster error: {exc}", file=sys.stderr)
        return EXIT_FORECASTER


if __name__ == "__main__":
    sys.exit(main())
