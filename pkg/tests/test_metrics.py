import pytest
import sys
import os

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.metrics import accuracy_report, mae, mape, rmse
from shared.errors import UndefinedMetricError
from shared.models import DayWindow, ForecastSet, ForecastSplit
from shared.utils import make_panel


def forecasts(panel, window, values, name="model"):
    return ForecastSet(model_name=name, split=ForecastSplit.TEST, window=window, keys=panel.keys, values=values)


def test_perfect_forecasts():
    panel = make_panel([[1, 2, 3, 4], [4, 3, 2, 1]])
    window = DayWindow(start=2, end=4)
    fs = forecasts(panel, window, panel.window_demand(window))
    assert rmse(fs, panel) == 0
    assert mae(fs, panel) == 0
    assert mape(fs, panel) == 0


def test_constant_offset():
    panel = make_panel([[1, 2, 3, 4], [4, 3, 2, 1]])
    window = DayWindow(start=2, end=4)
    fs = forecasts(panel, window, panel.window_demand(window) + 2)
    assert rmse(fs, panel) == pytest.approx(2.0)
    assert mae(fs, panel) == pytest.approx(2.0)


def test_mape_examples():
    panel = make_panel([[4, 0]])
    assert mape(forecasts(panel, DayWindow(start=1, end=1), [[5.0]]), panel) == pytest.approx(0.25)
    zero_day = forecasts(panel, DayWindow(start=2, end=2), [[1.0]])
    assert mape(zero_day, panel) == pytest.approx(1e8)
    report = accuracy_report(zero_day, panel)
    assert report.mape_unreliable


def test_rmse_at_least_mae():
    rng = np.random.default_rng(0)
    for _ in range(50):
        panel = make_panel(rng.integers(0, 10, size=(3, 8)))
        window = DayWindow(start=2, end=8)
        fs = forecasts(panel, window, rng.normal(4, 3, size=(3, 7)))
        assert rmse(fs, panel) >= mae(fs, panel) >= 0


def test_row_order_invariance():
    rng = np.random.default_rng(1)
    demand = rng.integers(0, 10, size=(3, 6))
    values = rng.normal(4, 2, size=(3, 6))
    window = DayWindow(start=1, end=6)
    panel = make_panel(demand)
    fs = forecasts(panel, window, values)

    order = [2, 0, 1]
    panel_b = panel.subset(order)
    fs_b = forecasts(panel_b, window, values[order])
    assert rmse(fs, panel) == pytest.approx(rmse(fs_b, panel_b), abs=1e-12)
    assert mae(fs, panel) == pytest.approx(mae(fs_b, panel_b), abs=1e-12)


def test_empty_window_undefined():
    panel = make_panel([[1, 2]])
    fs = forecasts(panel, DayWindow(start=2, end=1), np.zeros((1, 0)))
    with pytest.raises(UndefinedMetricError):
        rmse(fs, panel)


def test_macro_pooling_and_per_series():
    panel = make_panel([[0, 0, 0, 0], [0, 0, 0, 0]])
    window = DayWindow(start=1, end=4)
    fs = forecasts(panel, window, [[1.0, 1.0, 1.0, 1.0], [3.0, 3.0, 3.0, 3.0]])
    assert rmse(fs, panel) == pytest.approx(np.sqrt(5.0))
    assert rmse(fs, panel, pooling="macro") == pytest.approx(2.0)
    report = accuracy_report(fs, panel)
    assert [s.rmse for s in report.per_series] == pytest.approx([1.0, 3.0])
    assert report.n_points == 8
    with pytest.raises(ValueError):
        rmse(fs, panel, pooling="median")
