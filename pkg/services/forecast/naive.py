from typing import Optional

import numpy as np
from pydantic import BaseModel

from shared.errors import InsufficientHistoryError
from shared.models import DayWindow, ForecastSet, ForecastSplit, SeriesPanel


class NaiveModel(BaseModel):
    """Persistence forecaster; nothing to fit"""

    fit_end: Optional[int] = None


def naive_forecast(
    panel: SeriesPanel,
    window: DayWindow,
    split: ForecastSplit = ForecastSplit.TEST,
) -> ForecastSet:
    """Forecast each day with the realized demand of the day before"""
    if window.length and window.start <= panel.first_day:
        raise InsufficientHistoryError(
            f"naive forecast for d_{window.start} needs the previous day", module="forecast"
        )
    if window.length:
        previous = DayWindow(start=window.start - 1, end=window.end - 1)
        values = panel.window_demand(previous).astype(float)
    else:
        values = np.zeros((panel.n_series, 0))
    return ForecastSet(
        model_name="naive",
        split=split,
        window=window,
        keys=panel.keys,
        values=values,
    )
