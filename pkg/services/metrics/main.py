import logging
from typing import Tuple

import numpy as np

from shared.errors import UndefinedMetricError
from shared.models import AccuracyReport, ForecastSet, SeriesAccuracy, SeriesPanel

logger = logging.getLogger(__name__)

MAPE_EPS = 1e-8
# MAPE above 1000% is reported but flagged
MAPE_UNRELIABLE = 10.0
POOLING_MODES = ("micro", "macro")


def _errors(fs: ForecastSet, panel: SeriesPanel) -> Tuple[np.ndarray, np.ndarray]:
    """Forecast errors and actuals over the forecast window, aligned by series key"""
    if fs.window.length == 0:
        raise UndefinedMetricError(f"{fs.model_name}: accuracy is undefined on an empty window")
    if fs.keys != panel.keys:
        lookup = {key: i for i, key in enumerate(panel.keys)}
        missing = [key.series_id for key in fs.keys if key not in lookup]
        if missing:
            raise UndefinedMetricError(f"{fs.model_name}: series not in panel: {missing[:5]}")
        actual = panel.window_demand(fs.window)[[lookup[key] for key in fs.keys]]
    else:
        actual = panel.window_demand(fs.window)
    actual = actual.astype(float)
    return fs.values - actual, actual


def _check_pooling(pooling: str) -> None:
    if pooling not in POOLING_MODES:
        raise ValueError(f"pooling must be one of {POOLING_MODES}, got {pooling!r}")


def rmse(fs: ForecastSet, panel: SeriesPanel, pooling: str = "micro") -> float:
    """Root mean squared error pooled over all (series, day) cells, or averaged per series"""
    _check_pooling(pooling)
    err, _ = _errors(fs, panel)
    if pooling == "macro":
        return float(np.mean(np.sqrt(np.mean(err ** 2, axis=1))))
    return float(np.sqrt(np.mean(err ** 2)))


def mae(fs: ForecastSet, panel: SeriesPanel, pooling: str = "micro") -> float:
    _check_pooling(pooling)
    err, _ = _errors(fs, panel)
    if pooling == "macro":
        return float(np.mean(np.mean(np.abs(err), axis=1)))
    return float(np.mean(np.abs(err)))


def mape(fs: ForecastSet, panel: SeriesPanel, eps: float = MAPE_EPS, pooling: str = "micro") -> float:
    """Mean of |error| / (|actual| + eps); explodes on zero-demand days"""
    _check_pooling(pooling)
    err, actual = _errors(fs, panel)
    ratio = np.abs(err) / (np.abs(actual) + eps)
    if pooling == "macro":
        return float(np.mean(np.mean(ratio, axis=1)))
    return float(np.mean(ratio))


def per_series_accuracy(fs: ForecastSet, panel: SeriesPanel) -> list:
    err, _ = _errors(fs, panel)
    series_rmse = np.sqrt(np.mean(err ** 2, axis=1))
    series_mae = np.mean(np.abs(err), axis=1)
    return [
        SeriesAccuracy(series_id=key.series_id, rmse=float(r), mae=float(a))
        for key, r, a in zip(fs.keys, series_rmse, series_mae)
    ]


def accuracy_report(
    fs: ForecastSet,
    panel: SeriesPanel,
    eps: float = MAPE_EPS,
    pooling: str = "micro",
) -> AccuracyReport:
    value = mape(fs, panel, eps=eps, pooling=pooling)
    unreliable = value > MAPE_UNRELIABLE
    if unreliable:
        logger.warning(
            "%s: MAPE %.3g exceeds %d%%; zero-demand days dominate it",
            fs.model_name, value, int(MAPE_UNRELIABLE * 100),
        )
    return AccuracyReport(
        model_name=fs.model_name,
        split=fs.split,
        rmse=rmse(fs, panel, pooling=pooling),
        mae=mae(fs, panel, pooling=pooling),
        mape=value,
        mape_unreliable=unreliable,
        n_points=fs.values.size,
        pooling=pooling,
        per_series=per_series_accuracy(fs, panel),
    )
