from .main import export_forecasts, forecast_frame, import_forecasts, read_header

__all__ = ["export_forecasts", "forecast_frame", "import_forecasts", "read_header"]
