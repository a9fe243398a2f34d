"""Per-series regressors for the global models.

Every feature on day t is computed from demand strictly before t plus the
calendar of day t, which is known in advance. Rolling means cover days
t-window .. t-1 and never include day t itself: including it would hand the
target to the model. Rows without a full 28-day history are kept on the day
axis but marked invalid, and their missing lags stay NaN rather than being
filled.
"""

import logging
import re
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from shared.errors import InsufficientHistoryError
from shared.models import DayWindow, FeatureMatrix, SeriesPanel

logger = logging.getLogger(__name__)

LAGS = (1, 7, 14, 28)
ROLLING_WINDOWS = (7, 14, 28)
WARMUP_DAYS = 28
RAW_CALENDAR_COLUMNS = ("weekday", "month")


def event_column(name: str) -> str:
    slug = re.sub(r"[^0-9a-z]+", "_", name.lower().replace("'", "")).strip("_")
    return f"event_{slug}"


def feature_columns(event_names: Sequence[str]) -> List[str]:
    columns = [f"lag_{lag}" for lag in LAGS]
    columns += [f"rollmean_{window}" for window in ROLLING_WINDOWS]
    columns += list(RAW_CALENDAR_COLUMNS)
    columns += [f"weekday_{d}" for d in range(1, 8)]
    columns += [f"month_{m}" for m in range(1, 13)]
    columns += [event_column(name) for name in event_names]
    columns.append("snap")
    return columns


def model_columns(features: FeatureMatrix) -> List[str]:
    """Columns the tree models train on: one-hot calendar, not the raw integers"""
    return [c for c in features.columns if c not in RAW_CALENDAR_COLUMNS]


def rolling_mean(values: Sequence[float], window: int, t: int) -> Optional[float]:
    """Mean of the `window` days before day t (1-based); None without a full window"""
    if window < 1:
        raise ValueError("window must be positive")
    if t <= window or t > len(values) + 1:
        return None
    return float(np.mean(np.asarray(values[t - window - 1:t - 1], dtype=float)))


def build_features(panel: SeriesPanel) -> FeatureMatrix:
    """Lags, rolling means and calendar/event/SNAP indicators for every (series, day)"""
    demand = panel.demand.astype(float)
    n_series, n_days = demand.shape
    event_names = sorted(set().union(*(day.event_flags for day in panel.days)))
    columns = feature_columns(event_names)
    index = {name: i for i, name in enumerate(columns)}
    values = np.full((n_series, n_days, len(columns)), np.nan)

    for lag in LAGS:
        if lag < n_days:
            values[:, lag:, index[f"lag_{lag}"]] = demand[:, :-lag]

    cumulative = np.concatenate([np.zeros((n_series, 1)), np.cumsum(demand, axis=1)], axis=1)
    for window in ROLLING_WINDOWS:
        if window < n_days:
            # position p averages days p-window .. p-1
            sums = cumulative[:, window:n_days] - cumulative[:, :n_days - window]
            values[:, window:, index[f"rollmean_{window}"]] = sums / window

    weekday = np.array([day.weekday for day in panel.days], dtype=float)
    month = np.array([day.month for day in panel.days], dtype=float)
    values[:, :, index["weekday"]] = weekday
    values[:, :, index["month"]] = month
    for d in range(1, 8):
        values[:, :, index[f"weekday_{d}"]] = (weekday == d).astype(float)
    for m in range(1, 13):
        values[:, :, index[f"month_{m}"]] = (month == m).astype(float)
    for name in event_names:
        flags = np.array([name in day.event_flags for day in panel.days], dtype=float)
        values[:, :, index[event_column(name)]] = flags
    for i, key in enumerate(panel.keys):
        values[i, :, index["snap"]] = [float(day.snap_flag(key.state_id)) for day in panel.days]

    valid = np.zeros((n_series, n_days), dtype=bool)
    valid[:, WARMUP_DAYS:] = True

    logger.debug("Built %d feature columns for %d series x %d days", len(columns), n_series, n_days)
    return FeatureMatrix(
        columns=columns,
        d_index=[day.d_index for day in panel.days],
        values=values,
        valid=valid,
    )


def window_rows(features: FeatureMatrix, window: DayWindow, columns: List[str]) -> np.ndarray:
    """Series-major rows for every (series, day) in the window; all must be valid"""
    start = features.position(window.start)
    stop = start + window.length
    if start < 0 or stop > len(features.d_index):
        raise InsufficientHistoryError(f"window d_{window.start}..d_{window.end} is outside the feature matrix")
    if not features.valid[:, start:stop].all():
        raise InsufficientHistoryError(
            f"window d_{window.start}..d_{window.end} starts inside the {WARMUP_DAYS}-day warm-up"
        )
    block = features.values[:, start:stop][:, :, features.column_positions(columns)]
    return block.reshape(-1, len(columns))


def training_rows(
    features: FeatureMatrix,
    panel: SeriesPanel,
    through_day: int,
    columns: List[str],
) -> Tuple[np.ndarray, np.ndarray]:
    """Pooled valid rows of all series up to and including `through_day`, with targets"""
    stop = features.position(through_day) + 1
    mask = features.valid[:, :stop]
    block = features.values[:, :stop][:, :, features.column_positions(columns)]
    X = block[mask]
    y = panel.demand[:, :stop].astype(float)[mask]
    return X, y


def export_feature_csv(features: FeatureMatrix, panel: SeriesPanel, path: Union[str, Path]) -> int:
    """Dump one row per valid (series, day) with its target; returns the row count"""
    series_idx, day_pos = np.nonzero(features.valid)
    frame = pd.DataFrame({
        "item_id": [panel.keys[i].item_id for i in series_idx],
        "dept_id": [panel.keys[i].dept_id for i in series_idx],
        "store_id": [panel.keys[i].store_id for i in series_idx],
        "state_id": [panel.keys[i].state_id for i in series_idx],
        "d": [f"d_{features.d_index[p]}" for p in day_pos],
    })
    block = pd.DataFrame(features.values[series_idx, day_pos], columns=features.columns)
    frame = pd.concat([frame, block], axis=1)
    frame["demand"] = panel.demand[series_idx, day_pos]
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info("Wrote %d feature rows to %s", len(frame), path)
    return len(frame)
