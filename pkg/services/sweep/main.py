import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from shared.audit_utils import audit_sweep_completed
from shared.errors import SweepError
from shared.models import (
    AccuracyReport,
    AffinityCheck,
    CostParams,
    ForecastSet,
    RankingRow,
    SeriesPanel,
    SimOutcome,
    SimReport,
    SimReportRow,
    SweepSpec,
)
from services.metrics import mae, rmse
from services.newsvendor import simulate

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["model", "b", "h", "avg_cost", "fill_rate", "rmse", "mae", "cost_reduction_pct", "fill_gain_pp"]


def _check_windows(models: Sequence[ForecastSet]) -> None:
    reference = models[0]
    for fs in models[1:]:
        if fs.window != reference.window:
            raise SweepError(
                f"{fs.model_name} covers d_{fs.window.start}..d_{fs.window.end}, "
                f"{reference.model_name} covers d_{reference.window.start}..d_{reference.window.end}"
            )
        if fs.keys != reference.keys:
            raise SweepError(f"{fs.model_name} and {reference.model_name} forecast different series")


def _row(outcome: SimOutcome, base: SimOutcome, accuracy: Dict[str, float]) -> SimReportRow:
    reduction = 0.0 if base.avg_cost == 0 else 100.0 * (1.0 - outcome.avg_cost / base.avg_cost)
    return SimReportRow(
        model=outcome.model_name,
        b=outcome.b,
        h=outcome.h,
        avg_cost=outcome.avg_cost,
        fill_rate=outcome.fill_rate,
        rmse=accuracy["rmse"],
        mae=accuracy["mae"],
        cost_reduction_pct=reduction,
        fill_gain_pp=100.0 * (outcome.fill_rate - base.fill_rate),
    )


def affinity_check(model: str, b_values: Sequence[float], costs: Sequence[float], outcome: SimOutcome) -> AffinityCheck:
    """Least-squares line of avg cost in b and the largest deviation from it"""
    b = np.asarray(b_values, dtype=float)
    cost = np.asarray(costs, dtype=float)
    if np.unique(b).size < 2:
        # a single b pins only one point; the line follows from the unit totals
        slope = outcome.total_shortage_units / outcome.n_cells
        intercept = outcome.h * outcome.total_overage_units / outcome.n_cells
    else:
        slope, intercept = np.polyfit(b, cost, 1)
    residual = float(np.max(np.abs(cost - (intercept + slope * b))))
    return AffinityCheck(model=model, slope=float(slope), intercept=float(intercept), residual=residual)


def run_sweep(spec: SweepSpec, panel: SeriesPanel, audit: bool = False) -> SimReport:
    """Every model at every shortage penalty, with deltas against the baseline at the same b"""
    _check_windows(spec.models)
    names = [fs.model_name for fs in spec.models]
    if spec.baseline not in names:
        raise SweepError(f"baseline {spec.baseline!r} is not among models {names}")

    accuracy = {fs.model_name: {"rmse": rmse(fs, panel), "mae": mae(fs, panel)} for fs in spec.models}
    b_values = list(spec.b_values)
    if spec.reference_b not in b_values:
        b_values.append(spec.reference_b)

    outcomes: Dict[str, Dict[float, SimOutcome]] = {
        fs.model_name: {
            b: simulate(fs, panel, CostParams(h=spec.h, b=b), round_orders=spec.round_orders, audit=audit)
            for b in b_values
        }
        for fs in spec.models
    }
    base = outcomes[spec.baseline]

    rows = [
        _row(outcomes[name][b], base[b], accuracy[name])
        for name in names
        for b in spec.b_values
    ]
    reference_rows = [_row(outcomes[name][spec.reference_b], base[spec.reference_b], accuracy[name]) for name in names]

    affinity = []
    for name in names:
        costs = [outcomes[name][b].avg_cost for b in spec.b_values]
        check = affinity_check(name, spec.b_values, costs, outcomes[name][spec.b_values[0]])
        if check.residual > 1e-9:
            logger.warning("%s: avg cost deviates from a line in b by %.3g", name, check.residual)
        affinity.append(check)

    rankings = [
        RankingRow(b=b, ranking=sorted(names, key=lambda n: (outcomes[n][b].avg_cost, n)))
        for b in spec.b_values
    ]
    spread = {}
    for name in names:
        fills = [outcomes[name][b].fill_rate for b in spec.b_values]
        spread[name] = max(fills) - min(fills)

    if audit:
        audit_sweep_completed(len(names), spec.b_values)
    return SimReport(
        baseline=spec.baseline,
        h=spec.h,
        reference_b=spec.reference_b,
        rows=rows,
        reference_rows=reference_rows,
        affinity=affinity,
        rankings=rankings,
        fill_rate_spread=spread,
    )


def report_frame(report: SimReport) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in report.rows], columns=REPORT_COLUMNS)


def write_sim_report_csv(report: SimReport, path: Path) -> None:
    report_frame(report).to_csv(path, index=False, lineterminator="\n")


def sim_report_json(report: SimReport) -> dict:
    """Report nested by model, then by b"""
    models: Dict[str, dict] = {}
    for row in report.rows:
        entry = models.setdefault(row.model, {"rmse": row.rmse, "mae": row.mae, "by_b": {}})
        entry["by_b"][f"{row.b:g}"] = {
            "avg_cost": row.avg_cost,
            "fill_rate": row.fill_rate,
            "cost_reduction_pct": row.cost_reduction_pct,
            "fill_gain_pp": row.fill_gain_pp,
        }
    for check in report.affinity:
        models[check.model]["affinity"] = check.model_dump(exclude={"model"})
    for row in report.reference_rows:
        models[row.model]["reference"] = row.model_dump(exclude={"model", "rmse", "mae"})
    return {
        "baseline": report.baseline,
        "h": report.h,
        "reference_b": report.reference_b,
        "models": models,
        "rankings": [r.model_dump() for r in report.rankings],
        "fill_rate_spread": report.fill_rate_spread,
    }


def write_sim_report_json(report: SimReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(sim_report_json(report), handle, indent=2, sort_keys=True)
        handle.write("\n")


def format_tables(report: SimReport, validation: Optional[List[AccuracyReport]] = None) -> str:
    """Plain-text accuracy/KPI table at the reference b, cost-by-b table, rankings and affinity"""
    sections = []

    kpis = pd.DataFrame([
        {
            "Model": row.model,
            "RMSE": f"{row.rmse:.3f}",
            "MAE": f"{row.mae:.3f}",
            "Avg cost": f"{row.avg_cost:.3f}",
            "Fill rate": f"{row.fill_rate:.3f}",
            "Cost reduction %": f"{row.cost_reduction_pct:.1f}",
            "Fill gain pp": f"{row.fill_gain_pp:.1f}",
        }
        for row in report.reference_rows
    ])
    sections.append(
        f"Test accuracy and inventory KPIs at (h, b) = ({report.h:g}, {report.reference_b:g}), "
        f"deltas vs {report.baseline}\n" + kpis.to_string(index=False)
    )

    by_b = report_frame(report).pivot(index="model", columns="b", values="avg_cost")
    by_b = by_b.reindex([row.model for row in report.reference_rows])
    by_b.columns = [f"b={b:g}" for b in by_b.columns]
    sections.append(
        f"Average cost by shortage penalty (h = {report.h:g})\n"
        + by_b.to_string(float_format=lambda v: f"{v:.3f}", index_names=False)
    )

    ranks = pd.DataFrame([{"b": f"{r.b:g}", "ranking": " < ".join(r.ranking)} for r in report.rankings])
    sections.append("Model ranking by average cost\n" + ranks.to_string(index=False))

    affinity = pd.DataFrame([
        {
            "Model": c.model,
            "slope": f"{c.slope:.4f}",
            "intercept": f"{c.intercept:.4f}",
            "residual": f"{c.residual:.2e}",
            "fill spread": f"{report.fill_rate_spread[c.model]:.2e}",
        }
        for c in report.affinity
    ])
    sections.append("Cost line in b and fill-rate spread across b\n" + affinity.to_string(index=False))

    if validation:
        valid = pd.DataFrame([
            {"Model": r.model_name, "RMSE": f"{r.rmse:.3f}", "MAE": f"{r.mae:.3f}"}
            for r in validation
        ])
        sections.append("Validation accuracy\n" + valid.to_string(index=False))

    return "\n\n".join(sections) + "\n"
