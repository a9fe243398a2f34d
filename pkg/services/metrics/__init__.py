from .main import MAPE_EPS, MAPE_UNRELIABLE, accuracy_report, mae, mape, per_series_accuracy, rmse

__all__ = ["MAPE_EPS", "MAPE_UNRELIABLE", "accuracy_report", "mae", "mape", "per_series_accuracy", "rmse"]
