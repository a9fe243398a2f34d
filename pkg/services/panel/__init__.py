from .main import (
    count_matching_series,
    filter_panel,
    load_panel,
    make_splits,
    parse_day,
    write_panel,
)

__all__ = ["count_matching_series", "filter_panel", "load_panel", "make_splits", "parse_day", "write_panel"]
