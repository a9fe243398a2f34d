import datetime as dt
import logging
import re
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from shared.errors import (
    InsufficientHistoryError,
    PanelCoverageError,
    PanelFormatError,
    PanelParseError,
)
from shared.models import CalendarDay, SeriesKey, SeriesPanel, SplitSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ID_COLUMNS = ["id", "item_id", "dept_id", "cat_id", "store_id", "state_id"]
KEY_COLUMNS = ["item_id", "dept_id", "store_id", "state_id"]
EVENT_COLUMNS = ["event_name_1", "event_name_2"]
EVENT_TYPE_COLUMNS = ["event_type_1", "event_type_2"]
CALENDAR_COLUMNS = ["date", "wday", "month", "d"]
MAX_FEATURE_LAG = 28

_DAY_COLUMN = re.compile(r"^d_(\d+)$")
# pandas renames a repeated header "d_3" to "d_3.1"
_REPEATED_DAY_COLUMN = re.compile(r"^d_(\d+)\.\d+$")


def parse_day(label: str) -> int:
    """Parse a `d_<n>` label (or a bare integer) into its day ordinal"""
    text = str(label).strip()
    match = _DAY_COLUMN.match(text)
    if match:
        return int(match.group(1))
    if text.isdigit():
        return int(text)
    raise ValueError(f"not a day label: {label!r}")


def day_columns(columns: List[str]) -> List[str]:
    """Return the sales day columns d_1..d_T in order; missing or repeated days are errors"""
    indices = []
    for column in columns:
        if _REPEATED_DAY_COLUMN.match(column):
            raise PanelFormatError(f"duplicate day column {column.split('.')[0]}")
        match = _DAY_COLUMN.match(column)
        if match:
            indices.append(int(match.group(1)))
    if not indices:
        raise PanelFormatError("sales file has no d_<n> columns")
    if len(set(indices)) != len(indices):
        raise PanelFormatError("sales file repeats a day column")
    missing = sorted(set(range(1, max(indices) + 1)) - set(indices))
    if missing:
        raise PanelCoverageError(
            f"sales day axis has gaps: missing {', '.join(f'd_{d}' for d in missing[:5])}"
        )
    return [f"d_{d}" for d in sorted(indices)]


def apply_filter(frame: pd.DataFrame, subset: Optional[Mapping[str, str]]) -> pd.DataFrame:
    """Keep the rows whose columns equal every column=value pair"""
    for column, value in (subset or {}).items():
        if column not in frame.columns:
            raise PanelFormatError(f"filter column {column!r} is not in the sales file")
        frame = frame[frame[column].astype(str) == str(value)]
    return frame


def filter_panel(panel: SeriesPanel, subset: Optional[Mapping[str, str]]) -> SeriesPanel:
    """Apply a column=value filter to an already loaded panel"""
    indices = [
        i for i, key in enumerate(panel.keys)
        if all(key.field(column) == str(value) for column, value in (subset or {}).items())
    ]
    if not indices:
        raise PanelFormatError(f"filter {dict(subset or {})} matched no series")
    return panel.subset(indices)


def _parse_demand(frame: pd.DataFrame, columns: List[str]) -> np.ndarray:
    block = frame[columns]
    numeric = block.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() | (numeric < 0) | (numeric % 1 != 0)
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        series_id = frame.iloc[row]["id"] if "id" in frame.columns else str(row)
        raise PanelParseError(
            f"demand in row {series_id!r} column {columns[col]} is not a non-negative "
            f"integer: {block.iat[row, col]!r}"
        )
    return numeric.to_numpy(dtype=np.int64)


def _load_calendar(calendar_path: PathLike, horizon: int, states: List[str]) -> List[CalendarDay]:
    calendar = pd.read_csv(calendar_path, dtype=str, keep_default_na=False)
    missing_columns = [c for c in CALENDAR_COLUMNS if c not in calendar.columns]
    if missing_columns:
        raise PanelFormatError(f"calendar is missing columns {missing_columns}")
    snap_columns = {state: f"snap_{state}" for state in states}
    absent = [column for column in snap_columns.values() if column not in calendar.columns]
    if absent:
        raise PanelFormatError(f"calendar has no SNAP column for {absent}")

    rows: Dict[int, pd.Series] = {}
    for _, row in calendar.iterrows():
        try:
            d_index = parse_day(row["d"])
        except ValueError as e:
            raise PanelFormatError(f"calendar: {e}") from e
        if d_index in rows:
            raise PanelFormatError(f"calendar repeats d_{d_index}")
        rows[d_index] = row

    uncovered = [d for d in range(1, horizon + 1) if d not in rows]
    if uncovered:
        raise PanelCoverageError(
            f"calendar does not cover the sales horizon d_1..d_{horizon}: "
            f"first missing day d_{uncovered[0]}"
        )

    days = []
    for d_index in range(1, horizon + 1):
        row = rows[d_index]
        try:
            days.append(CalendarDay(
                d_index=d_index,
                date=dt.date.fromisoformat(row["date"].strip()),
                weekday=int(row["wday"]),
                month=int(row["month"]),
                event_flags=frozenset(
                    row[column].strip() for column in EVENT_COLUMNS
                    if column in calendar.columns and row[column].strip()
                ),
                snap_flags={state: row[column].strip() == "1" for state, column in snap_columns.items()},
            ))
        except ValueError as e:
            raise PanelParseError(f"calendar row d_{d_index}: {e}") from e
    return days


def load_panel(
    sales_path: PathLike,
    calendar_path: PathLike,
    subset: Optional[Mapping[str, str]] = None,
) -> SeriesPanel:
    """Load M5 sales and calendar CSVs into a dense panel of the filtered series"""
    header = list(pd.read_csv(sales_path, nrows=0).columns)
    missing_keys = [c for c in KEY_COLUMNS if c not in header]
    if missing_keys:
        raise PanelFormatError(f"sales file is missing id columns {missing_keys}")
    columns = day_columns(header)

    id_dtypes = {c: str for c in ID_COLUMNS if c in header}
    sales = pd.read_csv(sales_path, dtype=id_dtypes, keep_default_na=False)
    sales = apply_filter(sales, subset)
    if sales.empty:
        raise PanelFormatError(f"filter {dict(subset or {})} matched no series")

    sales = sales.sort_values(KEY_COLUMNS, kind="mergesort").reset_index(drop=True)
    if sales.duplicated(KEY_COLUMNS).any():
        first = sales[sales.duplicated(KEY_COLUMNS)].iloc[0]
        raise PanelFormatError(f"duplicate series key {tuple(first[KEY_COLUMNS])}")

    demand = _parse_demand(sales, columns)
    keys = [
        SeriesKey(**{column: row[column] for column in KEY_COLUMNS})
        for _, row in sales[KEY_COLUMNS].iterrows()
    ]
    states = sorted({key.state_id for key in keys})
    days = _load_calendar(calendar_path, len(columns), states)

    panel = SeriesPanel(keys=keys, days=days, demand=demand)
    logger.info("Loaded panel: %d series x %d days (filter %s)", panel.n_series, panel.n_days, dict(subset or {}))
    return panel


def count_matching_series(sales_path: PathLike, subset: Optional[Mapping[str, str]]) -> int:
    """Count the series a filter selects, reading only the filter columns"""
    columns = list((subset or {}).keys()) or ["item_id"]
    frame = pd.read_csv(sales_path, usecols=columns, dtype=str, keep_default_na=False)
    return len(apply_filter(frame, subset))


def write_panel(panel: SeriesPanel, sales_path: PathLike, calendar_path: PathLike) -> None:
    """Write a panel back to M5 wide sales and calendar files"""
    sales = pd.DataFrame({
        "id": [f"{key.series_id}_validation" for key in panel.keys],
        "item_id": [key.item_id for key in panel.keys],
        "dept_id": [key.dept_id for key in panel.keys],
        "cat_id": [key.cat_id for key in panel.keys],
        "store_id": [key.store_id for key in panel.keys],
        "state_id": [key.state_id for key in panel.keys],
    })
    demand = pd.DataFrame(panel.demand, columns=[f"d_{day.d_index}" for day in panel.days])
    pd.concat([sales, demand], axis=1).to_csv(sales_path, index=False, lineterminator="\n")

    states = sorted({state for day in panel.days for state in day.snap_flags})
    records = []
    for day in panel.days:
        events = sorted(day.event_flags)
        if len(events) > len(EVENT_COLUMNS):
            raise PanelFormatError(f"d_{day.d_index} has more events than the calendar format holds")
        events += [""] * (len(EVENT_COLUMNS) - len(events))
        record = {
            "date": day.date.isoformat(),
            "weekday": day.date.strftime("%A"),
            "wday": day.weekday,
            "month": day.month,
            "year": day.date.year,
            "d": f"d_{day.d_index}",
        }
        for name_column, type_column, event in zip(EVENT_COLUMNS, EVENT_TYPE_COLUMNS, events):
            record[name_column] = event
            record[type_column] = ""
        for state in states:
            record[f"snap_{state}"] = int(day.snap_flag(state))
        records.append(record)
    pd.DataFrame(records).to_csv(calendar_path, index=False, lineterminator="\n")


def make_splits(panel: SeriesPanel, valid_days: int = 28, test_days: int = 28) -> SplitSpec:
    """Chronological train / validation / test boundaries with the test window last"""
    if valid_days < 1 or test_days < 1:
        raise InsufficientHistoryError("validation and test windows need at least one day")
    needed = valid_days + test_days + MAX_FEATURE_LAG + 1
    if panel.n_days < needed:
        raise InsufficientHistoryError(
            f"panel has {panel.n_days} days; {valid_days}+{test_days} holdout days "
            f"plus {MAX_FEATURE_LAG + 1} warm-up days need at least {needed}"
        )
    test_end = panel.last_day
    valid_end = test_end - test_days
    train_end = valid_end - valid_days
    return SplitSpec(train_end=train_end, valid_end=valid_end, test_end=test_end, first_day=panel.first_day)
