import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from shared.audit_utils import audit_fit_warning
from shared.errors import FitError, InsufficientHistoryError, LeakageError, PanelCoverageError
from shared.models import (
    DayWindow,
    FeatureMatrix,
    ForecastSet,
    ForecastSplit,
    NativeModel,
    SeriesKey,
    SeriesPanel,
    SplitSpec,
)
from services.features import model_columns, training_rows, window_rows
from services.metrics import rmse

from .arima import ArimaModel, arima_fit, arima_forecast_step
from .boosting import BoostedEnsemble, BoostingHyper, gbr_fit, grid_label, select_best
from .holt_winters import HoltWintersModel, hw_fit, hw_forecast_step
from .naive import NaiveModel, naive_forecast

logger = logging.getLogger(__name__)

FittedModel = Union[NaiveModel, HoltWintersModel, ArimaModel, BoostedEnsemble]


class ModelSettings(BaseModel):
    season_length: int = Field(default=7, ge=2)
    hw_restarts: int = Field(default=2, ge=0)
    arima_max_iter: int = Field(default=2000, ge=1)
    gbr: BoostingHyper = BoostingHyper()
    seed: int = 0


def fit_holt_winters(panel: SeriesPanel, fit_end: int, settings: ModelSettings) -> HoltWintersModel:
    """Per-series Holt-Winters fits on days up to fit_end"""
    stop = panel.position(fit_end) + 1
    states = [
        hw_fit(panel.demand[i, :stop], m=settings.season_length, restarts=settings.hw_restarts, seed=settings.seed + i)
        for i in range(panel.n_series)
    ]
    return HoltWintersModel(fit_end=fit_end, states=states)


def fit_arima(panel: SeriesPanel, fit_end: int, settings: ModelSettings) -> ArimaModel:
    """Per-series ARIMA(1,1,1) fits; non-converged series keep their best parameters"""
    stop = panel.position(fit_end) + 1
    params = []
    for i, key in enumerate(panel.keys):
        try:
            params.append(arima_fit(panel.demand[i, :stop], max_iter=settings.arima_max_iter))
        except FitError as e:
            logger.warning("ARIMA fit for %s: %s; using best parameters found", key.series_id, e.detail)
            audit_fit_warning("arima", key.series_id, e.detail)
            params.append(e.best_params)
    return ArimaModel(fit_end=fit_end, params=params)


def fit_gbr(
    panel: SeriesPanel,
    features: FeatureMatrix,
    fit_end: int,
    hyper: BoostingHyper,
    seed: int = 0,
) -> BoostedEnsemble:
    """Global boosted trees on the pooled valid rows up to fit_end"""
    columns = model_columns(features)
    X, y = training_rows(features, panel, fit_end, columns)
    return gbr_fit(X, y, hyper, feature_names=columns, seed=seed, fit_end=fit_end)


def fit_model(
    name: NativeModel,
    panel: SeriesPanel,
    features: FeatureMatrix,
    fit_end: int,
    settings: ModelSettings,
    hyper: Optional[BoostingHyper] = None,
) -> FittedModel:
    if name == NativeModel.NAIVE:
        return NaiveModel(fit_end=fit_end)
    if name == NativeModel.HOLT_WINTERS:
        return fit_holt_winters(panel, fit_end, settings)
    if name == NativeModel.ARIMA:
        return fit_arima(panel, fit_end, settings)
    if name == NativeModel.GBR:
        return fit_gbr(panel, features, fit_end, hyper or settings.gbr, seed=settings.seed)
    raise ValueError(f"unknown model {name!r}")


def model_name_of(model: FittedModel) -> str:
    if isinstance(model, NaiveModel):
        return NativeModel.NAIVE.value
    if isinstance(model, HoltWintersModel):
        return NativeModel.HOLT_WINTERS.value
    if isinstance(model, ArimaModel):
        return NativeModel.ARIMA.value
    return NativeModel.GBR.value


def _check_window(model: FittedModel, panel: SeriesPanel, window: DayWindow) -> None:
    if window.length == 0:
        return
    if model.fit_end is not None and window.start <= model.fit_end:
        raise LeakageError(
            f"window d_{window.start}..d_{window.end} overlaps data the model was fit on "
            f"(through d_{model.fit_end})"
        )
    if window.start <= panel.first_day:
        raise InsufficientHistoryError(f"no history before d_{window.start}", module="forecast")
    if window.end > panel.last_day:
        raise PanelCoverageError(f"window ends at d_{window.end}, panel ends at d_{panel.last_day}", module="forecast")


def _roll_holt_winters(model: HoltWintersModel, panel: SeriesPanel, window: DayWindow) -> np.ndarray:
    values = np.zeros((panel.n_series, window.length))
    for i, state in enumerate(model.states):
        series = panel.demand[i]
        # absorb any realized days between the fit end and the window
        for d in range(model.fit_end + 1, window.start):
            state, _ = hw_forecast_step(state, float(series[panel.position(d)]))
        for j, d in enumerate(window.days):
            values[i, j] = state.forecast
            if j + 1 < window.length:
                state, _ = hw_forecast_step(state, float(series[panel.position(d)]))
    return values


def _roll_arima(model: ArimaModel, panel: SeriesPanel, window: DayWindow) -> np.ndarray:
    values = np.zeros((panel.n_series, window.length))
    for i, params in enumerate(model.params):
        series = panel.demand[i].astype(float)
        for j, d in enumerate(window.days):
            values[i, j] = arima_forecast_step(params, series[:panel.position(d)])
    return values


def predict(
    model: FittedModel,
    panel: SeriesPanel,
    features: Optional[FeatureMatrix],
    window: DayWindow,
    split: ForecastSplit = ForecastSplit.TEST,
) -> ForecastSet:
    """Rolling one-step-ahead forecasts over the window from data through the previous day"""
    _check_window(model, panel, window)
    name = model_name_of(model)
    if isinstance(model, NaiveModel):
        return naive_forecast(panel, window, split)
    if isinstance(model, HoltWintersModel):
        values = _roll_holt_winters(model, panel, window)
    elif isinstance(model, ArimaModel):
        values = _roll_arima(model, panel, window)
    else:
        if features is None:
            raise ValueError("boosted trees need the feature matrix")
        X = window_rows(features, window, model.feature_names)
        values = model.predict(X).reshape(panel.n_series, window.length)
    return ForecastSet(model_name=name, split=split, window=window, keys=panel.keys, values=values)


def tune_gbr(
    panel: SeriesPanel,
    features: FeatureMatrix,
    splits: SplitSpec,
    candidates: List[BoostingHyper],
    seed: int = 0,
) -> Tuple[BoostingHyper, Dict[str, float]]:
    """Pick the grid entry with the lowest validation RMSE after fitting on train"""
    scores: Dict[str, float] = {}
    for hyper in candidates:
        model = fit_gbr(panel, features, splits.train_end, hyper, seed=seed)
        forecasts = predict(model, panel, features, splits.valid_window, ForecastSplit.VALIDATION)
        scores[grid_label(hyper)] = rmse(forecasts, panel)
        logger.info("GBR %s: validation RMSE %.4f", grid_label(hyper), scores[grid_label(hyper)])
    best, score = select_best(scores, candidates)
    logger.info("Selected GBR %s (validation RMSE %.4f)", grid_label(best), score)
    return best, scores


def model_summary(model: FittedModel, keys: Optional[Sequence[SeriesKey]] = None) -> Dict[str, Any]:
    """Audit summary of a fitted model"""
    name = model_name_of(model)
    summary: Dict[str, Any] = {"model": name, "fit_end": model.fit_end}
    if isinstance(model, HoltWintersModel):
        summary["n_series"] = len(model.states)
        summary["series"] = [
            {"series_id": keys[i].series_id if keys else str(i), **state.model_dump()}
            for i, state in enumerate(model.states)
        ]
    elif isinstance(model, ArimaModel):
        summary["n_series"] = len(model.params)
        summary["n_not_converged"] = sum(not p.converged for p in model.params)
        summary["series"] = [
            {"series_id": keys[i].series_id if keys else str(i), **params.model_dump()}
            for i, params in enumerate(model.params)
        ]
    elif isinstance(model, BoostedEnsemble):
        summary.update({
            "n_trees": len(model.trees),
            "learning_rate": model.learning_rate,
            "max_depth": model.hyper.max_depth,
            "min_leaf": model.hyper.min_leaf,
            "base_score": model.base_score,
            "n_features": len(model.feature_names),
            "train_sse": model.train_sse,
        })
    return summary
