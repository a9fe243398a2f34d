from .arima import ArimaModel, arima_fit, arima_forecast_step
from .boosting import BoostedEnsemble, BoostingHyper, gbr_fit, hyper_grid
from .holt_winters import HoltWintersModel, hw_fit, hw_forecast_step
from .main import (
    FittedModel,
    ModelSettings,
    fit_model,
    model_name_of,
    model_summary,
    predict,
    tune_gbr,
)
from .naive import NaiveModel, naive_forecast

__all__ = [
    "ArimaModel", "arima_fit", "arima_forecast_step",
    "BoostedEnsemble", "BoostingHyper", "gbr_fit", "hyper_grid",
    "HoltWintersModel", "hw_fit", "hw_forecast_step",
    "FittedModel", "ModelSettings", "fit_model", "model_name_of", "model_summary", "predict", "tune_gbr",
    "NaiveModel", "naive_forecast",
]
