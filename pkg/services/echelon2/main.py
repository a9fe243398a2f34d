import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from shared.audit_utils import audit_echelon_completed
from shared.errors import EchelonConfigError, UndefinedMetricError
from shared.models import CostParams, DCDemand, EchelonConfig, EchelonOutcome, ForecastSet, SeriesKey, SeriesPanel

logger = logging.getLogger(__name__)

ALLOCATION_EPS = 1e-8
FILL_EPS = 1e-8
PARTITION_KEYS = ("none", "item_id", "dept_id", "cat_id", "store_id", "state_id")


def _check_store_set(store_set: Sequence[int], n_series: int) -> List[int]:
    stores = list(store_set)
    if not stores:
        raise EchelonConfigError("store_set is empty")
    out_of_range = [s for s in stores if s < 0 or s >= n_series]
    if out_of_range:
        raise EchelonConfigError(f"store_set indices {out_of_range} outside 0..{n_series - 1}")
    return stores


def aggregate_dc_demand(fs: ForecastSet, panel: SeriesPanel, store_set: Sequence[int]) -> DCDemand:
    """Daily DC demand and forecast as sums over the stores; DC orders clamp the forecast at zero"""
    stores = _check_store_set(store_set, len(fs.keys))
    realized = panel.window_demand(fs.window)[stores].astype(float).sum(axis=0)
    forecast = fs.values[stores].sum(axis=0)
    return DCDemand(realized=realized, forecast=forecast, orders=np.maximum(0.0, forecast))


def allocate(requests: np.ndarray, available: float) -> np.ndarray:
    """Fill every request when supply covers them, otherwise ration in proportion to request size"""
    requests = np.asarray(requests, dtype=float)
    total = float(requests.sum())
    if total <= available:
        return requests.copy()
    return requests / (total + ALLOCATION_EPS) * available


def default_echelon_config(
    store_set: Sequence[int],
    b: float,
    h_dc: float = 1.0,
    b_dc: Optional[float] = None,
    b_store: Optional[float] = None,
    initial_dc_inventory: float = 0.0,
) -> EchelonConfig:
    return EchelonConfig(
        store_set=list(store_set),
        dc_cost=CostParams(h=h_dc, b=b if b_dc is None else b_dc),
        store_shortage=b if b_store is None else b_store,
        initial_dc_inventory=initial_dc_inventory,
    )


def simulate_network(
    fs: ForecastSet,
    panel: SeriesPanel,
    cfg: EchelonConfig,
    partition: str = "all",
    audit: bool = False,
) -> EchelonOutcome:
    """One DC supplying the stores in cfg.store_set, day by day over the forecast window.

    The DC cost of a day is the newsvendor cost of its supply (carried inventory plus
    the day's order) against the summed store demand under cfg.dc_cost. Inventory the
    stores did not draw carries over to the next day.
    """
    if fs.window.length == 0:
        raise UndefinedMetricError(f"{fs.model_name}: cannot simulate an empty window", module="echelon2")
    if fs.keys != panel.keys:
        raise EchelonConfigError(f"{fs.model_name}: forecast series do not match the panel")

    stores = _check_store_set(cfg.store_set, len(fs.keys))
    dc = aggregate_dc_demand(fs, panel, stores)
    demand = panel.window_demand(fs.window)[stores].astype(float)
    requests = np.maximum(0.0, fs.values[stores])
    n_days = fs.window.length

    inventory = np.zeros(n_days + 1)
    inventory[0] = cfg.initial_dc_inventory
    supply = np.zeros(n_days)
    shipments = np.zeros((len(stores), n_days))
    daily_cost = np.zeros(n_days)
    dc_cost_total = 0.0
    penalty_total = 0.0
    shortfall = np.zeros(len(stores))
    served = 0.0

    for t in range(n_days):
        available = inventory[t] + dc.orders[t]
        fulfilled = allocate(requests[:, t], available)
        supply[t] = available
        shipments[:, t] = fulfilled
        dc_cost = (
            cfg.dc_cost.h * max(available - dc.realized[t], 0.0)
            + cfg.dc_cost.b * max(dc.realized[t] - available, 0.0)
        )
        short = np.maximum(demand[:, t] - fulfilled, 0.0)
        penalty = cfg.store_shortage * float(short.sum())

        daily_cost[t] = dc_cost + penalty
        dc_cost_total += dc_cost
        penalty_total += penalty
        shortfall += short
        served += float(np.minimum(demand[:, t], fulfilled).sum())
        inventory[t + 1] = max(0.0, available - float(fulfilled.sum()))

    total_demand = float(demand.sum())
    outcome = EchelonOutcome(
        model_name=fs.model_name,
        partition=partition,
        store_set=stores,
        avg_network_cost=float(daily_cost.mean()),
        network_fill_rate=float(np.clip(served / (total_demand + FILL_EPS), 0.0, 1.0)),
        total_dc_cost=dc_cost_total,
        total_store_penalty=penalty_total,
        store_shortfall=[float(s) for s in shortfall],
        n_days=n_days,
        dc_inventory=inventory,
        dc_supply=supply,
        fulfilled=shipments,
    )
    logger.debug(
        "%s [%s]: network cost %.4f, fill rate %.4f",
        fs.model_name, partition, outcome.avg_network_cost, outcome.network_fill_rate,
    )
    if audit:
        audit_echelon_completed(fs.model_name, partition, outcome.avg_network_cost, outcome.network_fill_rate)
    return outcome


def partition_store_sets(keys: Sequence[SeriesKey], partition_by: str = "none") -> Dict[str, List[int]]:
    """Group series indices into independent DC networks by a key column"""
    if partition_by not in PARTITION_KEYS:
        raise EchelonConfigError(f"partition_by must be one of {PARTITION_KEYS}, got {partition_by!r}")
    if partition_by == "none":
        return {"all": list(range(len(keys)))}
    groups: Dict[str, List[int]] = {}
    for i, key in enumerate(keys):
        groups.setdefault(key.field(partition_by), []).append(i)
    return {label: groups[label] for label in sorted(groups)}


def simulate_partitions(
    fs: ForecastSet,
    panel: SeriesPanel,
    partition_by: str,
    b: float,
    h_dc: float = 1.0,
    b_dc: Optional[float] = None,
    b_store: Optional[float] = None,
    initial_dc_inventory: float = 0.0,
    audit: bool = False,
) -> List[EchelonOutcome]:
    outcomes = []
    for label, stores in partition_store_sets(fs.keys, partition_by).items():
        cfg = default_echelon_config(stores, b, h_dc, b_dc, b_store, initial_dc_inventory)
        outcomes.append(simulate_network(fs, panel, cfg, partition=label, audit=audit))
    return outcomes
