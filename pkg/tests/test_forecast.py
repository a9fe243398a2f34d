import pytest
import sys
import os

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.features import build_features, model_columns, window_rows
from services.forecast import (
    BoostingHyper,
    ModelSettings,
    NaiveModel,
    arima_fit,
    arima_forecast_step,
    fit_model,
    gbr_fit,
    hw_fit,
    hw_forecast_step,
    model_summary,
    naive_forecast,
    predict,
)
from services.forecast.holt_winters import HoltWintersModel
from services.metrics import rmse
from shared.errors import FitError, InsufficientHistoryError, LeakageError
from shared.models import ArimaParams, DayWindow, ForecastSplit, HoltWintersState, NativeModel
from shared.utils import make_panel

CYCLE = [4.0, 9.0, 1.0, 6.0, 3.0, 8.0, 2.0]


def fit_or_best(train):
    try:
        return arima_fit(train)
    except FitError as e:
        return e.best_params


def simulate_arima(n, c, phi, theta, seed):
    rng = np.random.default_rng(seed)
    eps = rng.normal(size=n + 1)
    z = np.zeros(n + 1)
    for t in range(1, n + 1):
        z[t] = c + phi * z[t - 1] + eps[t] + theta * eps[t - 1]
    return np.concatenate([[0.0], np.cumsum(z[1:])])


def test_naive_definition():
    panel = make_panel([[3, 0, 7]])
    fs = naive_forecast(panel, DayWindow(start=2, end=3))
    assert fs.values.tolist() == [[3.0, 0.0]]
    assert fs.model_name == "naive"


def test_naive_needs_previous_day():
    panel = make_panel([[3, 0, 7]])
    with pytest.raises(InsufficientHistoryError):
        naive_forecast(panel, DayWindow(start=1, end=3))


def test_naive_rmse_is_first_difference_rmse():
    demand = np.array([[5, 2, 8, 8, 1, 0, 4, 6]])
    panel = make_panel(demand)
    fs = naive_forecast(panel, DayWindow(start=3, end=8))
    diffs = np.diff(demand[0])[1:]
    assert rmse(fs, panel) == pytest.approx(np.sqrt(np.mean(diffs ** 2)), abs=1e-12)


def test_hw_periodic_series_fit_exactly():
    y = np.array(CYCLE * 8)
    state = hw_fit(y)
    assert state.forecast == pytest.approx(CYCLE[len(y) % 7], abs=1e-6)
    for t in range(14):
        state, forecast = hw_forecast_step(state, CYCLE[(len(y) + t) % 7])
        assert forecast == pytest.approx(CYCLE[(len(y) + t + 1) % 7], abs=1e-6)


def test_hw_constant_series():
    state = hw_fit([5.0] * 28)
    assert state.level == pytest.approx(5.0, abs=1e-9)
    assert state.trend == pytest.approx(0.0, abs=1e-9)
    assert max(abs(s) for s in state.seasonal) < 1e-9
    assert state.forecast == pytest.approx(5.0, abs=1e-9)


def test_hw_too_short():
    with pytest.raises(InsufficientHistoryError):
        hw_fit([1.0] * 13)


def test_hw_zero_smoothing_freezes_state():
    state = HoltWintersState(level=3.0, trend=0.0, seasonal=(0.5,) * 7, alpha=0.0, beta=0.0, gamma=0.0)
    next_state, forecast = hw_forecast_step(state, 10.0)
    assert (next_state.level, next_state.trend, next_state.seasonal) == (3.0, 0.0, (0.5,) * 7)
    assert forecast == 3.5


def test_hw_collapses_to_naive():
    state = HoltWintersState(level=0.0, trend=0.0, seasonal=(0.0,) * 7, alpha=1.0, beta=0.0, gamma=0.0)
    for y in [3.0, 7.0, 1.0]:
        state, forecast = hw_forecast_step(state, y)
        assert forecast == y


def test_hw_step_matches_hand_recursion():
    y = [5, 7, 6, 9, 4, 3, 8, 6, 8, 7, 10, 5, 4, 9]
    alpha, beta, gamma = 0.5, 0.3, 0.2
    level, trend = 6.0, 0.1
    seasonal = [-1.0, 1.0, 0.0, 3.0, -2.0, -3.0, 2.0]
    state = HoltWintersState(level=level, trend=trend, seasonal=tuple(seasonal), alpha=alpha, beta=beta, gamma=gamma)
    for obs in y[:3]:
        s_old = seasonal.pop(0)
        new_level = alpha * (obs - s_old) + (1 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1 - beta) * trend
        seasonal.append(gamma * (obs - new_level) + (1 - gamma) * s_old)
        level = new_level
        state, forecast = hw_forecast_step(state, obs)
        assert forecast == pytest.approx(level + trend + seasonal[0], abs=1e-12)
    assert state.seasonal == pytest.approx(tuple(seasonal), abs=1e-12)


def test_arima_random_walk_params_give_naive():
    params = ArimaParams(c=0.0, phi=0.0, theta=0.0)
    assert arima_forecast_step(params, [3.0, 5.0, 2.0]) == 2.0


def test_arima_phi_one_rejected():
    with pytest.raises(ValueError):
        ArimaParams(c=0.0, phi=1.0, theta=0.0)


def test_arima_step_matches_hand_recursion():
    history = [3.0, 5.0, 4.0, 6.0, 7.0, 5.0, 8.0, 9.0, 7.0, 10.0]
    c, phi, theta = 0.1, 0.5, 0.2
    z = np.diff(history)
    e = 0.0
    for k in range(1, len(z)):
        e = z[k] - c - phi * z[k - 1] - theta * e
    expected = history[-1] + c + phi * z[-1] + theta * e
    params = ArimaParams(c=c, phi=phi, theta=theta)
    assert arima_forecast_step(params, history) == pytest.approx(expected, abs=1e-12)


def test_arima_recovers_simulated_params():
    y = simulate_arima(20000, c=0.0, phi=0.6, theta=-0.3, seed=7)
    params = fit_or_best(y)
    assert params.phi == pytest.approx(0.6, abs=0.05)
    assert params.theta == pytest.approx(-0.3, abs=0.05)
    assert params.c == pytest.approx(0.0, abs=0.05)
    assert params.sigma2 == pytest.approx(1.0, abs=0.1)


def test_arima_recovers_params_from_shorter_series():
    y = simulate_arima(5000, c=0.0, phi=0.6, theta=-0.3, seed=11)
    params = fit_or_best(y)
    assert params.phi == pytest.approx(0.6, abs=0.1)
    assert params.theta == pytest.approx(-0.3, abs=0.1)


def test_arima_white_noise_differences():
    y = simulate_arima(2000, c=0.0, phi=0.0, theta=0.0, seed=3)
    params = fit_or_best(y)
    assert abs(params.phi + params.theta) < 0.1


def test_arima_too_short():
    with pytest.raises(InsufficientHistoryError):
        arima_fit(np.arange(29.0))


def test_gbr_constant_target():
    X = np.random.default_rng(0).normal(size=(100, 3))
    model = gbr_fit(X, np.full(100, 4.0), BoostingHyper(n_estimators=20, min_leaf=5))
    assert model.trees == []
    assert np.all(model.predict(X) == 4.0)


def test_gbr_step_function():
    X = np.arange(100, dtype=float).reshape(-1, 1)
    y = np.where(X[:, 0] < 50, 0.0, 10.0)
    model = gbr_fit(X, y, BoostingHyper(n_estimators=50, learning_rate=0.1, max_depth=2, min_leaf=5))
    assert model.train_sse[-1] < 0.01 * np.sum((y - y.mean()) ** 2)


def test_gbr_sse_non_increasing():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 4))
    y = X[:, 0] ** 2 + np.sin(X[:, 1]) + rng.normal(scale=0.1, size=300)
    model = gbr_fit(X, y, BoostingHyper(n_estimators=60, learning_rate=0.1, max_depth=3, min_leaf=5))
    assert all(b <= a + 1e-9 for a, b in zip(model.train_sse, model.train_sse[1:]))


def test_gbr_prediction_is_base_plus_scaled_trees():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 3))
    y = 2 * X[:, 0] + rng.normal(size=200)
    model = gbr_fit(X, y, BoostingHyper(n_estimators=10, learning_rate=0.2, max_depth=2, min_leaf=5))
    row = X[:1]
    manual = model.base_score + 0.2 * sum(tree.predict(row)[0] for tree in model.trees)
    assert model.predict(row)[0] == pytest.approx(manual, abs=1e-12)


def test_gbr_too_few_rows():
    with pytest.raises(InsufficientHistoryError):
        gbr_fit(np.zeros((9, 1)), np.arange(9.0), BoostingHyper(min_leaf=5))


def test_predict_naive_matches_naive_forecast():
    panel = make_panel([np.arange(60) % 5, np.arange(60) % 3])
    window = DayWindow(start=45, end=60)
    fs = predict(NaiveModel(fit_end=44), panel, None, window)
    assert fs == naive_forecast(panel, window)


def test_predict_rejects_overlapping_window():
    panel = make_panel([np.arange(60) % 5])
    model = fit_model(NativeModel.HOLT_WINTERS, panel, None, 40, ModelSettings())
    with pytest.raises(LeakageError):
        predict(model, panel, None, DayWindow(start=40, end=50))


def test_predict_hw_periodic_window():
    demand = np.array([CYCLE * 10])
    panel = make_panel(demand)
    model = fit_model(NativeModel.HOLT_WINTERS, panel, None, 42, ModelSettings())
    fs = predict(model, panel, None, DayWindow(start=50, end=70))
    expected = demand[0, 49:70]
    np.testing.assert_allclose(fs.values[0], expected, atol=1e-6)


@pytest.mark.parametrize("name", [NativeModel.HOLT_WINTERS, NativeModel.ARIMA, NativeModel.GBR])
def test_forecasts_ignore_future_demand(name):
    rng = np.random.default_rng(5)
    demand = rng.poisson(4, size=(3, 90))
    future = demand.copy()
    future[:, 75:] = rng.poisson(20, size=(3, 15))
    settings = ModelSettings(gbr=BoostingHyper(n_estimators=10, max_depth=2, min_leaf=5))
    window = DayWindow(start=61, end=75)
    outputs = []
    for matrix in (demand, future):
        panel = make_panel(matrix)
        features = build_features(panel)
        model = fit_model(name, panel, features, 60, settings)
        outputs.append(predict(model, panel, features, window).values)
    np.testing.assert_array_equal(outputs[0], outputs[1])


def test_predict_gbr_uses_window_rows():
    rng = np.random.default_rng(6)
    panel = make_panel(rng.poisson(5, size=(2, 70)))
    features = build_features(panel)
    model = fit_model(NativeModel.GBR, panel, features, 55, ModelSettings(gbr=BoostingHyper(n_estimators=5, min_leaf=5)))
    window = DayWindow(start=56, end=70)
    fs = predict(model, panel, features, window, ForecastSplit.VALIDATION)
    X = window_rows(features, window, model_columns(features))
    np.testing.assert_allclose(fs.values.reshape(-1), model.predict(X))
    assert fs.split == ForecastSplit.VALIDATION


def test_model_summary_holt_winters():
    panel = make_panel([CYCLE * 4])
    model = fit_model(NativeModel.HOLT_WINTERS, panel, None, 21, ModelSettings())
    assert isinstance(model, HoltWintersModel)
    summary = model_summary(model, panel.keys)
    assert summary["model"] == "holt_winters"
    assert summary["n_series"] == 1
    assert summary["series"][0]["series_id"] == "FOODS_1_001_CA_1"
    assert 0.0 <= summary["series"][0]["alpha"] <= 1.0
