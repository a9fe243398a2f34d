import logging
import math
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from shared.audit_utils import audit_forecasts_imported
from shared.errors import (
    ForecastCoverageError,
    ForecastExportError,
    ForecastParseError,
    ForecastReferenceError,
)
from shared.models import DayWindow, ForecastSet, ForecastSplit, SeriesPanel
from services.panel.main import KEY_COLUMNS, parse_day

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BODY_COLUMNS = KEY_COLUMNS + ["d", "forecast"]
HEADER_FIELDS = ("model", "split", "days", "clamped")


def _format_days(window: DayWindow) -> str:
    return f"{window.start}-{window.end}"


def _parse_days(text: str) -> DayWindow:
    start, _, end = text.partition("-")
    try:
        return DayWindow(start=int(start), end=int(end))
    except ValueError as e:
        raise ForecastParseError(f"bad days header {text!r}: {e}")


def forecast_frame(fs: ForecastSet) -> pd.DataFrame:
    """Body rows sorted by series key, then day"""
    order = sorted(range(len(fs.keys)), key=lambda i: fs.keys[i].sort_key())
    days = list(fs.window.days)
    records = []
    for i in order:
        key = fs.keys[i]
        for j, d in enumerate(days):
            records.append((key.item_id, key.dept_id, key.store_id, key.state_id, f"d_{d}", float(fs.values[i, j])))
    return pd.DataFrame.from_records(records, columns=BODY_COLUMNS)


def export_forecasts(fs: ForecastSet, path: PathLike) -> None:
    """Write the header block and one row per (series, day)"""
    header = [
        f"# model={fs.model_name}",
        f"# split={fs.split.value}",
        f"# days={_format_days(fs.window)}",
        f"# clamped={str(fs.clamped).lower()}",
    ]
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write("\n".join(header) + "\n")
            forecast_frame(fs).to_csv(handle, index=False, lineterminator="\n")
    except OSError as e:
        raise ForecastExportError(f"cannot write {path}: {e}")
    logger.info("Exported %s forecasts (%d cells) to %s", fs.model_name, fs.values.size, path)


def read_header(path: PathLike) -> Tuple[Dict[str, str], int]:
    """Header fields and the number of comment lines preceding the column row"""
    fields: Dict[str, str] = {}
    n_lines = 0
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith("#"):
                    break
                n_lines += 1
                name, sep, value = line[1:].strip().partition("=")
                if sep:
                    fields[name.strip()] = value.strip()
    except OSError as e:
        raise ForecastParseError(f"cannot read {path}: {e}")
    return fields, n_lines


def _parse_value(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ForecastParseError(f"{where}: forecast {text!r} is not a number")
    if not math.isfinite(value):
        raise ForecastParseError(f"{where}: forecast {text!r} is not finite")
    return value


def import_forecasts(
    path: PathLike,
    panel: SeriesPanel,
    window: Optional[DayWindow] = None,
    model_name: Optional[str] = None,
) -> ForecastSet:
    """Read a forecast file for every panel series over the window.

    The window defaults to the file's own days header. Rows outside the window are
    ignored; rows for series the panel does not hold are an error.
    """
    fields, n_header = read_header(path)
    name = model_name or fields.get("model")
    if not name:
        raise ForecastParseError(f"{path}: no '# model=' header")
    try:
        split = ForecastSplit(fields.get("split", ForecastSplit.TEST.value))
    except ValueError:
        raise ForecastParseError(f"{path}: unknown split {fields['split']!r}")
    if window is None:
        if "days" not in fields:
            raise ForecastParseError(f"{path}: no window given and no '# days=' header")
        window = _parse_days(fields["days"])
    clamped = fields.get("clamped", "false").lower() == "true"

    try:
        frame = pd.read_csv(path, skiprows=n_header, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ForecastParseError(f"{path}: {e}")
    missing_columns = [c for c in BODY_COLUMNS if c not in frame.columns]
    if missing_columns:
        raise ForecastParseError(f"{path}: missing columns {missing_columns}")

    lookup = {key.sort_key(): i for i, key in enumerate(panel.keys)}
    values = np.full((panel.n_series, window.length), np.nan)
    seen = np.zeros((panel.n_series, window.length), dtype=bool)

    rows = zip(frame["item_id"], frame["dept_id"], frame["store_id"], frame["state_id"], frame["d"], frame["forecast"])
    for line, (item_id, dept_id, store_id, state_id, day, text) in enumerate(rows, start=n_header + 2):
        where = f"{path}:{line}"
        index = lookup.get((item_id, dept_id, store_id, state_id))
        if index is None:
            raise ForecastReferenceError(f"{where}: series {item_id}_{store_id} is not in the panel")
        try:
            d = parse_day(day)
        except ValueError as e:
            raise ForecastParseError(f"{where}: {e}")
        if d not in window:
            continue
        j = d - window.start
        if seen[index, j]:
            raise ForecastCoverageError(f"{where}: duplicate cell ({item_id}_{store_id}, d_{d})")
        values[index, j] = _parse_value(text, where)
        seen[index, j] = True

    if not seen.all():
        gaps = np.argwhere(~seen)
        i, j = gaps[0]
        raise ForecastCoverageError(
            f"{path}: missing cell ({panel.keys[i].series_id}, d_{window.start + j}) "
            f"and {len(gaps) - 1} more"
        )

    fs = ForecastSet(model_name=name, split=split, window=window, keys=panel.keys, values=values, clamped=clamped)
    logger.info("Imported %s forecasts for d_%d..d_%d from %s", name, window.start, window.end, path)
    audit_forecasts_imported(name, str(path), int(values.size))
    return fs
