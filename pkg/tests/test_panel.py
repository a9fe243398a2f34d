import pytest
import sys
import os

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.panel import filter_panel, load_panel, make_splits, parse_day, write_panel
from shared.errors import InsufficientHistoryError, PanelCoverageError, PanelFormatError, PanelParseError
from shared.utils import FIXTURES_DIR, make_panel

SALES = FIXTURES_DIR / "sales_synthetic.csv"
CALENDAR = FIXTURES_DIR / "calendar_synthetic.csv"
CA_FOODS_1 = {"state_id": "CA", "dept_id": "FOODS_1"}


def write_sales(path, rows, days):
    header = "id,item_id,dept_id,cat_id,store_id,state_id," + ",".join(f"d_{d}" for d in days)
    lines = [header]
    for item, store, values in rows:
        lines.append(f"{item}_{store}_validation,{item},FOODS_1,FOODS,{store},CA," + ",".join(values))
    path.write_text("\n".join(lines) + "\n")


def write_calendar(path, n_days):
    lines = ["date,wm_yr_wk,weekday,wday,month,year,d,event_name_1,event_type_1,event_name_2,event_type_2,snap_CA,snap_TX,snap_WI"]
    for d in range(1, n_days + 1):
        lines.append(f"2011-02-{d:02d},11101,Tuesday,4,2,2011,d_{d},,,,,1,0,0")
    path.write_text("\n".join(lines) + "\n")


def test_load_fixture_applies_filter():
    panel = load_panel(SALES, CALENDAR, CA_FOODS_1)
    assert panel.n_series == 5
    assert panel.n_days == 140
    assert all(key.state_id == "CA" for key in panel.keys)
    assert [key.sort_key() for key in panel.keys] == sorted(key.sort_key() for key in panel.keys)


def test_calendar_joined_per_day():
    panel = load_panel(SALES, CALENDAR, CA_FOODS_1)
    first = panel.days[0]
    assert first.d_index == 1
    assert first.weekday == 1
    assert first.month == 1
    assert first.snap_flag("CA") is False
    feb_first = panel.days[3]
    assert feb_first.date.isoformat() == "2011-02-01"
    assert feb_first.snap_flag("CA") is True


def test_single_series_identity(tmp_path):
    sales = tmp_path / "sales.csv"
    calendar = tmp_path / "calendar.csv"
    write_sales(sales, [("FOODS_1_001", "CA_1", ["3", "0", "7", "2", "5"])], range(1, 6))
    write_calendar(calendar, 5)
    panel = load_panel(sales, calendar)
    assert panel.demand.shape == (1, 5)
    assert panel.demand[0].tolist() == [3, 0, 7, 2, 5]


def test_missing_day_column_is_coverage_error(tmp_path):
    sales = tmp_path / "sales.csv"
    calendar = tmp_path / "calendar.csv"
    write_sales(sales, [("FOODS_1_001", "CA_1", ["1", "2", "4", "5"])], [1, 2, 4, 5])
    write_calendar(calendar, 5)
    with pytest.raises(PanelCoverageError) as e:
        load_panel(sales, calendar)
    assert "d_3" in str(e.value)


def test_duplicate_day_column_is_format_error(tmp_path):
    sales = tmp_path / "sales.csv"
    calendar = tmp_path / "calendar.csv"
    write_sales(sales, [("FOODS_1_001", "CA_1", ["1", "2", "2", "5"])], [1, 2, 2, 3])
    write_calendar(calendar, 3)
    with pytest.raises(PanelFormatError):
        load_panel(sales, calendar)


def test_short_calendar_is_coverage_error(tmp_path):
    sales = tmp_path / "sales.csv"
    calendar = tmp_path / "calendar.csv"
    write_sales(sales, [("FOODS_1_001", "CA_1", ["1", "2", "3", "4", "5"])], range(1, 6))
    write_calendar(calendar, 3)
    with pytest.raises(PanelCoverageError):
        load_panel(sales, calendar)


def test_non_numeric_cell_names_row_and_column(tmp_path):
    sales = tmp_path / "sales.csv"
    calendar = tmp_path / "calendar.csv"
    write_sales(sales, [("FOODS_1_001", "CA_1", ["1", "2", "x", "4"])], range(1, 5))
    write_calendar(calendar, 4)
    with pytest.raises(PanelParseError) as e:
        load_panel(sales, calendar)
    assert "FOODS_1_001_CA_1_validation" in str(e.value)
    assert "d_3" in str(e.value)


def test_filter_matching_nothing(tmp_path):
    with pytest.raises(PanelFormatError):
        load_panel(SALES, CALENDAR, {"state_id": "WI"})


def test_round_trip(tmp_path):
    panel = load_panel(SALES, CALENDAR, CA_FOODS_1)
    sales = tmp_path / "sales.csv"
    calendar = tmp_path / "calendar.csv"
    write_panel(panel, sales, calendar)
    reloaded = load_panel(sales, calendar)
    assert reloaded == panel

    # byte-stable on a second write
    write_panel(reloaded, tmp_path / "sales2.csv", tmp_path / "calendar2.csv")
    assert (tmp_path / "sales2.csv").read_bytes() == sales.read_bytes()


def test_filter_idempotent():
    panel = load_panel(SALES, CALENDAR, {"state_id": "CA"})
    once = filter_panel(panel, {"store_id": "CA_2"})
    twice = filter_panel(once, {"store_id": "CA_2"})
    assert once == twice
    assert once.n_series == 2


def test_splits_default_on_long_panel():
    panel = make_panel(np.zeros((1, 1913), dtype=int))
    splits = make_splits(panel)
    assert (splits.train_end, splits.valid_end, splits.test_end) == (1857, 1885, 1913)


def test_splits_partition_day_axis():
    panel = make_panel(np.zeros((1, 100), dtype=int))
    splits = make_splits(panel, valid_days=28, test_days=28)
    assert splits.train_window.days == range(1, 45)
    windows = [splits.train_window, splits.valid_window, splits.test_window]
    covered = [d for w in windows for d in w.days]
    assert covered == list(range(1, 101))


def test_splits_too_short():
    panel = make_panel(np.zeros((1, 56), dtype=int))
    with pytest.raises(InsufficientHistoryError):
        make_splits(panel)


def test_parse_day():
    assert parse_day("d_17") == 17
    assert parse_day("17") == 17
    with pytest.raises(ValueError):
        parse_day("day17")


def test_panel_rejects_negative_demand():
    with pytest.raises(ValueError):
        make_panel([[1, -2, 3]])
