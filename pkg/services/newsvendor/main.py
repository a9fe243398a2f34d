import logging
from typing import Union

import numpy as np

from shared.audit_utils import audit_simulation_completed
from shared.errors import UndefinedMetricError
from shared.models import CostParams, ForecastSet, SeriesPanel, SimOutcome

logger = logging.getLogger(__name__)

FILL_EPS = 1e-8

ArrayOrFloat = Union[float, np.ndarray]


def order_from_forecast(forecast: ArrayOrFloat, round_orders: bool = False) -> ArrayOrFloat:
    """Q = max(0, forecast); optionally rounded half-up to whole units"""
    orders = np.maximum(0.0, np.asarray(forecast, dtype=float))
    if round_orders:
        orders = np.floor(orders + 0.5)
    if orders.ndim == 0:
        return float(orders)
    return orders


def period_cost(Q: ArrayOrFloat, D: ArrayOrFloat, params: CostParams) -> ArrayOrFloat:
    """h * overage + b * underage"""
    Q = np.asarray(Q, dtype=float)
    D = np.asarray(D, dtype=float)
    cost = params.h * np.maximum(Q - D, 0.0) + params.b * np.maximum(D - Q, 0.0)
    if cost.ndim == 0:
        return float(cost)
    return cost


def simulate(
    fs: ForecastSet,
    panel: SeriesPanel,
    params: CostParams,
    round_orders: bool = False,
    audit: bool = False,
) -> SimOutcome:
    """Score every (series, day) cell as an independent single-period order"""
    if fs.window.length == 0:
        raise UndefinedMetricError(f"{fs.model_name}: cannot simulate an empty window", module="newsvendor")
    if fs.keys != panel.keys:
        raise UndefinedMetricError(f"{fs.model_name}: forecast series do not match the panel", module="newsvendor")

    demand = panel.window_demand(fs.window).astype(float)
    orders = order_from_forecast(fs.values, round_orders=round_orders)
    overage = np.maximum(orders - demand, 0.0)
    shortage = np.maximum(demand - orders, 0.0)
    costs = params.h * overage + params.b * shortage

    total_overage = float(overage.sum())
    total_shortage = float(shortage.sum())
    total_demand = float(demand.sum())
    n_cells = int(demand.size)
    outcome = SimOutcome(
        model_name=fs.model_name,
        h=params.h,
        b=params.b,
        avg_cost=(params.h * total_overage + params.b * total_shortage) / n_cells,
        fill_rate=float(np.clip(1.0 - total_shortage / (total_demand + FILL_EPS), 0.0, 1.0)),
        total_overage_units=total_overage,
        total_shortage_units=total_shortage,
        total_demand=total_demand,
        n_cells=n_cells,
        per_day_costs=costs,
    )
    logger.debug("%s at b=%g: avg cost %.4f, fill rate %.4f", fs.model_name, params.b, outcome.avg_cost, outcome.fill_rate)
    if audit:
        audit_simulation_completed(fs.model_name, params.b, outcome.avg_cost, outcome.fill_rate)
    return outcome
