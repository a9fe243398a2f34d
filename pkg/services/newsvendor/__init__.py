from .main import FILL_EPS, order_from_forecast, period_cost, simulate

__all__ = ["FILL_EPS", "order_from_forecast", "period_cost", "simulate"]
