from .main import (
    affinity_check,
    format_tables,
    report_frame,
    run_sweep,
    sim_report_json,
    write_sim_report_csv,
    write_sim_report_json,
)

__all__ = [
    "affinity_check", "format_tables", "report_frame", "run_sweep",
    "sim_report_json", "write_sim_report_csv", "write_sim_report_json",
]
