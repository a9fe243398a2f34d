import pytest
import sys
import os
import json

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.forecast import naive_forecast
from services.sweep import format_tables, run_sweep, write_sim_report_csv, write_sim_report_json
from shared.errors import SweepError
from shared.models import DayWindow, ForecastSet, ForecastSplit, SweepSpec
from shared.utils import make_panel

WINDOW = DayWindow(start=11, end=30)


def setup_models(seed=0):
    rng = np.random.default_rng(seed)
    panel = make_panel(rng.poisson(5, size=(4, 30)))
    naive = naive_forecast(panel, WINDOW)
    good = ForecastSet(
        model_name="good", split=ForecastSplit.TEST, window=WINDOW, keys=panel.keys,
        values=panel.window_demand(WINDOW) + rng.normal(0, 0.5, size=(4, 20)),
    )
    return panel, [naive, good]


def test_baseline_row_has_no_delta():
    panel, models = setup_models()
    report = run_sweep(SweepSpec(models=models), panel)
    for row in report.rows:
        if row.model == "naive":
            assert row.cost_reduction_pct == 0
            assert row.fill_gain_pp == 0
    assert len(report.rows) == 6
    assert [r.b for r in report.reference_rows] == [5.0, 5.0]


def test_cost_reduction_formula():
    panel, models = setup_models()
    report = run_sweep(SweepSpec(models=models), panel)
    base = next(r for r in report.reference_rows if r.model == "naive")
    good = next(r for r in report.reference_rows if r.model == "good")
    assert good.cost_reduction_pct == pytest.approx(100 * (1 - good.avg_cost / base.avg_cost))
    assert good.fill_gain_pp == pytest.approx(100 * (good.fill_rate - base.fill_rate))


def test_affinity_and_fill_invariance():
    panel, models = setup_models(1)
    report = run_sweep(SweepSpec(models=models), panel)
    for check in report.affinity:
        assert check.residual < 1e-9
    for name, spread in report.fill_rate_spread.items():
        assert spread == 0.0
    for name in ("naive", "good"):
        fills = {r.fill_rate for r in report.rows if r.model == name}
        assert len(fills) == 1


def test_rankings_per_b():
    panel, models = setup_models(2)
    report = run_sweep(SweepSpec(models=models), panel)
    assert [r.b for r in report.rankings] == [2.0, 5.0, 10.0]
    assert all(sorted(r.ranking) == ["good", "naive"] for r in report.rankings)


def test_mismatched_windows():
    panel, models = setup_models()
    other = naive_forecast(panel, DayWindow(start=12, end=30))
    other = other.model_copy(update={"model_name": "shifted"})
    with pytest.raises(SweepError):
        run_sweep(SweepSpec(models=[models[0], other]), panel)


def test_baseline_must_exist():
    panel, models = setup_models()
    with pytest.raises(ValueError):
        SweepSpec(models=models[1:])


def test_reference_b_outside_grid():
    panel, models = setup_models()
    report = run_sweep(SweepSpec(models=models, b_values=[2.0, 10.0], reference_b=5.0), panel)
    assert len(report.rows) == 4
    assert [r.b for r in report.reference_rows] == [5.0, 5.0]


def test_writers(tmp_path):
    panel, models = setup_models()
    report = run_sweep(SweepSpec(models=models), panel)
    write_sim_report_csv(report, tmp_path / "a.csv")
    write_sim_report_csv(report, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "model,b,h,avg_cost,fill_rate,rmse,mae,cost_reduction_pct,fill_gain_pp"

    write_sim_report_json(report, tmp_path / "report.json")
    payload = json.loads((tmp_path / "report.json").read_text())
    assert set(payload["models"]) == {"naive", "good"}
    assert set(payload["models"]["good"]["by_b"]) == {"2", "5", "10"}

    tables = format_tables(report)
    assert "Average cost by shortage penalty" in tables
    assert "b=10" in tables
