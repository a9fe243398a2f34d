import pytest
import sys
import os

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.newsvendor import order_from_forecast, period_cost, simulate
from shared.errors import UndefinedMetricError
from shared.models import CostParams, DayWindow, ForecastSet, ForecastSplit
from shared.utils import make_panel


def forecasts(panel, window, values, name="model"):
    return ForecastSet(model_name=name, split=ForecastSplit.TEST, window=window, keys=panel.keys, values=values)


def brute_force(demand, values, h, b):
    total_cost = 0.0
    short = 0.0
    n = 0
    for i in range(len(demand)):
        for t in range(len(demand[i])):
            q = values[i][t] if values[i][t] > 0 else 0.0
            d = float(demand[i][t])
            if q >= d:
                total_cost += h * (q - d)
            else:
                total_cost += b * (d - q)
                short += d - q
            n += 1
    total = float(sum(sum(row) for row in demand))
    return total_cost / n, 1.0 - short / (total + 1e-8)


def test_order_from_forecast():
    assert order_from_forecast(-1.4) == 0
    assert order_from_forecast(0.0) == 0
    assert order_from_forecast(3.2) == 3.2
    assert order_from_forecast(2.5, round_orders=True) == 3.0
    assert order_from_forecast(2.4, round_orders=True) == 2.0


def test_period_cost():
    params = CostParams(h=1, b=5)
    assert period_cost(4, 4, params) == 0
    assert period_cost(5, 3, params) == 2
    assert period_cost(3, 5, params) == 10


def test_cost_params_positive():
    with pytest.raises(ValueError):
        CostParams(h=0, b=5)
    with pytest.raises(ValueError):
        CostParams(h=1, b=float("inf"))


def test_perfect_forecasts():
    panel = make_panel([[2, 4, 1], [0, 3, 5]])
    window = DayWindow(start=1, end=3)
    outcome = simulate(forecasts(panel, window, panel.window_demand(window)), panel, CostParams(h=1, b=5))
    assert outcome.avg_cost == 0
    assert outcome.fill_rate == pytest.approx(1.0)


def test_worked_three_day_example():
    panel = make_panel([[2, 4, 1]])
    window = DayWindow(start=1, end=3)
    outcome = simulate(forecasts(panel, window, [[3.0, 3.0, 3.0]]), panel, CostParams(h=1, b=2))
    assert outcome.per_day_costs.tolist() == [[1.0, 2.0, 2.0]]
    assert outcome.avg_cost == pytest.approx(5 / 3)
    assert outcome.fill_rate == pytest.approx(1 - 1 / 7)
    assert outcome.total_overage_units == 3.0
    assert outcome.total_shortage_units == 1.0


def test_oracle_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n_series = int(rng.integers(1, 4))
        n_days = int(rng.integers(1, 11))
        demand = rng.integers(0, 12, size=(n_series, n_days))
        values = rng.normal(4, 4, size=(n_series, n_days))
        h = float(rng.uniform(0.1, 5))
        b = float(rng.uniform(0.1, 20))
        panel = make_panel(demand)
        window = DayWindow(start=1, end=n_days)
        outcome = simulate(forecasts(panel, window, values), panel, CostParams(h=h, b=b), audit=False)
        cost, fill = brute_force(demand.tolist(), values.tolist(), h, b)
        assert abs(outcome.avg_cost - cost) <= 1e-12 * max(1.0, cost)
        assert abs(outcome.fill_rate - fill) <= 1e-12


def test_avg_cost_identity_and_fill_invariance():
    rng = np.random.default_rng(3)
    panel = make_panel(rng.integers(0, 10, size=(3, 10)))
    window = DayWindow(start=1, end=10)
    fs = forecasts(panel, window, rng.normal(5, 3, size=(3, 10)))
    outcomes = [simulate(fs, panel, CostParams(h=1, b=b)) for b in (2, 5, 10)]
    for o in outcomes:
        assert o.avg_cost == pytest.approx((o.h * o.total_overage_units + o.b * o.total_shortage_units) / 30, abs=1e-12)
    assert outcomes[0].fill_rate == outcomes[1].fill_rate == outcomes[2].fill_rate
    slope_low = (outcomes[1].avg_cost - outcomes[0].avg_cost) / 3
    slope_high = (outcomes[2].avg_cost - outcomes[1].avg_cost) / 5
    assert slope_low == pytest.approx(slope_high, abs=1e-12)
    assert slope_low == pytest.approx(outcomes[0].total_shortage_units / 30, abs=1e-12)


def test_clamping_never_raises_cost():
    rng = np.random.default_rng(4)
    panel = make_panel(rng.integers(0, 6, size=(2, 10)))
    window = DayWindow(start=1, end=10)
    raw = rng.normal(0, 3, size=(2, 10))
    params = CostParams(h=1, b=5)
    with_negatives = simulate(forecasts(panel, window, raw), panel, params)
    clamped = simulate(forecasts(panel, window, np.maximum(raw, 0)), panel, params)
    assert clamped.avg_cost == with_negatives.avg_cost


def test_round_orders_flag():
    panel = make_panel([[3, 3]])
    window = DayWindow(start=1, end=2)
    fs = forecasts(panel, window, [[2.6, 3.4]])
    assert simulate(fs, panel, CostParams(h=1, b=5), round_orders=True).avg_cost == 0
    assert simulate(fs, panel, CostParams(h=1, b=5)).avg_cost == pytest.approx((0.4 * 5 + 0.4) / 2)


def test_empty_window():
    panel = make_panel([[1, 2]])
    fs = forecasts(panel, DayWindow(start=2, end=1), np.zeros((1, 0)))
    with pytest.raises(UndefinedMetricError):
        simulate(fs, panel, CostParams(h=1, b=5))
