import json
import logging
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from shared.audit_utils import (
    audit_features_built,
    audit_model_fitted,
    audit_panel_loaded,
    audit_stage_failed,
    reset_audit_journal,
)
from shared.errors import ToolkitError
from shared.models import (
    AccuracyReport,
    CostParams,
    EchelonOutcome,
    FeatureMatrix,
    ForecastSet,
    ForecastSplit,
    NativeModel,
    RunManifest,
    SeriesPanel,
    SplitSpec,
    SweepSpec,
)
from shared.utils import generate_id, get_current_timestamp, sha256_file
from services.echelon2 import simulate_partitions
from services.features import build_features
from services.forecast import fit_model, model_summary, predict, tune_gbr
from services.forecast_io import export_forecasts, import_forecasts
from services.metrics import accuracy_report
from services.newsvendor import simulate
from services.panel import load_panel, make_splits
from services.sweep import format_tables, run_sweep, write_sim_report_csv, write_sim_report_json

from .config import RunConfig

logger = logging.getLogger(__name__)

REFIT_POLICY = "fit on train, score validation, refit on train+validation, roll one step at a time through test"
VERSIONED_PACKAGES = ("numpy", "pandas", "scipy", "scikit-learn", "numba", "pydantic")
ACCURACY_COLUMNS = ["model", "split", "rmse", "mae", "mape", "mape_unreliable", "n_points", "pooling"]


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def write_json(path: Path, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")


class RunContext:
    """Artifacts and state shared by the stages of one run"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output.dir)
        self.artifacts: List[str] = []
        self.panel: Optional[SeriesPanel] = None
        self.splits: Optional[SplitSpec] = None
        self.features: Optional[FeatureMatrix] = None
        self.validation: Dict[str, ForecastSet] = {}
        self.test: Dict[str, ForecastSet] = {}
        self.summaries: Dict[str, Dict[str, Any]] = {}
        self.accuracy: List[AccuracyReport] = []
        self.echelon: Dict[str, List[EchelonOutcome]] = {}

    def path(self, name: str) -> Path:
        target = self.output_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(name)
        return target


def fit_and_forecast(ctx: RunContext, name: NativeModel) -> Tuple[ForecastSet, ForecastSet, Dict[str, Any]]:
    """Validation forecasts from a train fit, test forecasts from a train+validation refit"""
    config, panel, splits, features = ctx.config, ctx.panel, ctx.splits, ctx.features
    settings = config.model_settings
    hyper = None
    scores: Dict[str, float] = {}
    if name == NativeModel.GBR:
        grid = config.gbr_grid
        if len(grid) > 1:
            hyper, scores = tune_gbr(panel, features, splits, grid, seed=config.seed)
        else:
            hyper = grid[0]

    logger.info("Fitting %s through d_%d", name.value, splits.train_end)
    model = fit_model(name, panel, features, splits.train_end, settings, hyper)
    validation = predict(model, panel, features, splits.valid_window, ForecastSplit.VALIDATION)

    logger.info("Refitting %s through d_%d", name.value, splits.valid_end)
    model = fit_model(name, panel, features, splits.valid_end, settings, hyper)
    test = predict(model, panel, features, splits.test_window, ForecastSplit.TEST)

    summary = model_summary(model, panel.keys)
    if scores:
        summary["validation_grid"] = scores
    audit_model_fitted(name.value, splits.valid_end, summary)
    return validation, test, summary


def stage_panel(ctx: RunContext) -> None:
    config = ctx.config
    ctx.panel = load_panel(config.data.sales, config.data.calendar, config.filter)
    ctx.splits = make_splits(ctx.panel, config.splits.valid_days, config.splits.test_days)
    audit_panel_loaded(ctx.panel.n_series, ctx.panel.n_days, config.filter)


def stage_features(ctx: RunContext) -> None:
    ctx.features = build_features(ctx.panel)
    audit_features_built(len(ctx.features.columns), int(ctx.features.valid.sum()))


def stage_forecast(ctx: RunContext) -> None:
    for name in ctx.config.models.native:
        validation, test, summary = fit_and_forecast(ctx, name)
        ctx.validation[name.value] = validation
        ctx.test[name.value] = test
        ctx.summaries[name.value] = summary
        export_forecasts(validation, ctx.path(f"forecasts/{name.value}_validation.csv"))
        export_forecasts(test, ctx.path(f"forecasts/{name.value}_test.csv"))
    write_json(ctx.path("model_audit.json"), ctx.summaries)


def stage_external(ctx: RunContext) -> None:
    for name, path in ctx.config.external.items():
        ctx.test[name] = import_forecasts(path, ctx.panel, ctx.splits.test_window, model_name=name)


def stage_metrics(ctx: RunContext) -> None:
    pooling = ctx.config.sweep.pooling
    ordered = [ctx.validation[n] for n in ctx.validation] + [ctx.test[n] for n in ctx.config.model_names]
    ctx.accuracy = [accuracy_report(fs, ctx.panel, pooling=pooling) for fs in ordered]
    frame = pd.DataFrame(
        [{**r.model_dump(include=set(ACCURACY_COLUMNS) - {"model", "split"}), "model": r.model_name, "split": r.split.value}
         for r in ctx.accuracy],
        columns=ACCURACY_COLUMNS,
    )
    frame.to_csv(ctx.path("accuracy.csv"), index=False, lineterminator="\n")
    write_json(ctx.path("accuracy.json"), [r.model_dump(mode="json") for r in ctx.accuracy])


def stage_sweep(ctx: RunContext) -> None:
    sweep = ctx.config.sweep
    spec = SweepSpec(
        h=sweep.h,
        b_values=sweep.b_values,
        models=[ctx.test[name] for name in ctx.config.model_names],
        baseline=sweep.baseline,
        reference_b=sweep.reference_b,
        round_orders=sweep.round_orders,
    )
    report = run_sweep(spec, ctx.panel, audit=True)
    write_sim_report_csv(report, ctx.path("sim_report.csv"))
    write_sim_report_json(report, ctx.path("sim_report.json"))
    validation = [r for r in ctx.accuracy if r.split == ForecastSplit.VALIDATION]
    with open(ctx.path("tables.txt"), "w", encoding="utf-8") as handle:
        handle.write(format_tables(report, validation))
    if ctx.config.output.verbose:
        write_per_day_costs(ctx, spec)


def write_per_day_costs(ctx: RunContext, spec: SweepSpec) -> None:
    records = []
    params = CostParams(h=spec.h, b=spec.reference_b)
    for fs in spec.models:
        costs = simulate(fs, ctx.panel, params, round_orders=spec.round_orders, audit=False).per_day_costs
        for i, key in enumerate(fs.keys):
            for j, d in enumerate(fs.window.days):
                records.append((fs.model_name, key.series_id, f"d_{d}", float(costs[i, j])))
    frame = pd.DataFrame.from_records(records, columns=["model", "series_id", "d", "cost"])
    frame.to_csv(ctx.path("per_day_costs.csv"), index=False, lineterminator="\n")


def stage_echelon(ctx: RunContext) -> None:
    config = ctx.config
    payload: Dict[str, Any] = {
        "partition_by": config.echelon.partition_by,
        "h_dc": config.echelon.h_dc,
        "b_dc": config.b_dc,
        "b_store": config.b_store,
        "initial_dc_inventory": config.echelon.initial_dc_inventory,
        "models": {},
    }
    for name in config.model_names:
        outcomes = simulate_partitions(
            ctx.test[name],
            ctx.panel,
            config.echelon.partition_by,
            b=config.sweep.reference_b,
            h_dc=config.echelon.h_dc,
            b_dc=config.b_dc,
            b_store=config.b_store,
            initial_dc_inventory=config.echelon.initial_dc_inventory,
            audit=True,
        )
        ctx.echelon[name] = outcomes
        partitions = []
        for outcome in outcomes:
            entry = outcome.model_dump()
            if config.output.verbose:
                entry["dc_inventory"] = [float(v) for v in outcome.dc_inventory]
            partitions.append(entry)
        payload["models"][name] = {
            "mean_network_cost": sum(o.avg_network_cost for o in outcomes) / len(outcomes),
            "mean_network_fill_rate": sum(o.network_fill_rate for o in outcomes) / len(outcomes),
            "partitions": partitions,
        }
    write_json(ctx.path("echelon.json"), payload)


STAGES = [
    ("panel", stage_panel),
    ("features", stage_features),
    ("forecast", stage_forecast),
    ("external", stage_external),
    ("metrics", stage_metrics),
    ("sweep", stage_sweep),
    ("echelon", stage_echelon),
]


def data_hashes(config: RunConfig) -> Dict[str, str]:
    paths = {"sales": config.data.sales, "calendar": config.data.calendar}
    paths.update({f"external.{name}": path for name, path in config.external.items()})
    return {name: sha256_file(path) for name, path in paths.items() if Path(path).is_file()}


def run_pipeline(config: RunConfig) -> RunManifest:
    """Run every stage in order; the first failing stage stops the run and is recorded in the manifest"""
    config_sha = sha256_file(config.source) if config.source else "none"
    hashes = data_hashes(config)
    run_id = generate_id(config_sha, sorted(hashes.items()), config.seed)
    journal = reset_audit_journal(run_id)

    manifest = RunManifest(
        run_id=run_id,
        started_at=get_current_timestamp(),
        seed=config.seed,
        config_sha256=config_sha,
        data_sha256=hashes,
        versions=package_versions(),
        refit_policy=REFIT_POLICY,
    )
    ctx = RunContext(config)
    ctx.output_dir.mkdir(parents=True, exist_ok=True)
    logger.info("Run %s writing to %s", run_id, ctx.output_dir)

    for stage, step in STAGES:
        if stage == "echelon" and not config.echelon.enabled:
            continue
        try:
            step(ctx)
        except ToolkitError as e:
            logger.error("Stage %s failed: %s", stage, e)
            audit_stage_failed(stage, e.module, e.detail)
            manifest.failed_stage = stage
            manifest.error = str(e)
            break
        except Exception as e:
            logger.exception("Stage %s failed unexpectedly", stage)
            audit_stage_failed(stage, stage, repr(e))
            manifest.failed_stage = stage
            manifest.error = f"{stage}: {e!r}"
            break
        if stage == "panel":
            manifest.n_series = ctx.panel.n_series
            manifest.splits = ctx.splits

    if manifest.failed_stage is None:
        manifest.status = "complete"
    else:
        manifest.status = "partial" if ctx.artifacts else "failed"
    manifest.finished_at = get_current_timestamp()
    manifest.artifacts = list(ctx.artifacts) + ["manifest.json"]
    manifest.audit_events = list(journal.events)
    with open(ctx.output_dir / "manifest.json", "w", encoding="utf-8") as handle:
        handle.write(manifest.model_dump_json(indent=2))
        handle.write("\n")
    logger.info("Run %s %s", run_id, manifest.status)
    return manifest
