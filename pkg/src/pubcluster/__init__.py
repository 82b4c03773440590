"""Control plane and deterministic simulator for an open public cluster."""

from .domain import (
    AdmissionPolicy,
    ClusterConfig,
    FitnessWeights,
    GaParams,
    NodeClass,
    NodeSpec,
    ThermalParams,
    parse_cluster_config,
)
from .allocator import AllocationPlan, LeaseRequest, PoolNode, evolve, fitness, oracle_optimal, repair
from .world import World
from .replay import replay

__all__ = [
    "AdmissionPolicy",
    "AllocationPlan",
    "ClusterConfig",
    "FitnessWeights",
    "GaParams",
    "LeaseRequest",
    "NodeClass",
    "NodeSpec",
    "PoolNode",
    "ThermalParams",
    "World",
    "evolve",
    "fitness",
    "oracle_optimal",
    "parse_cluster_config",
    "repair",
    "replay",
]

__version__ = "0.1.0"
