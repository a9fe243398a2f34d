from .main import (
    aggregate_dc_demand,
    allocate,
    default_echelon_config,
    partition_store_sets,
    simulate_network,
    simulate_partitions,
)

__all__ = [
    "aggregate_dc_demand", "allocate", "default_echelon_config",
    "partition_store_sets", "simulate_network", "simulate_partitions",
]
