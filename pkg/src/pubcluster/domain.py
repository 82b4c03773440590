"""Shared domain types and cluster-configuration ingestion.

All types here are immutable values: safe to copy and share freely.
The configuration wire format is a UTF-8 JSON document; see
``parse_cluster_config`` / ``config_to_json`` for the round trip.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import Optional

from . import errors

CONTROLLER_NODE_LIMIT = 45
CLASS_LEVEL_MIN = 0
CLASS_LEVEL_MAX = 9

DEFAULT_CLASS_LABELS = {0: "i486", 7: "athlon"}


@functools.total_ordering
@dataclass(frozen=True)
class NodeClass:
    """Ordinal performance rank; comparison and identity use level only."""

    level: int
    label: str = ""

    def __post_init__(self):
        if not (CLASS_LEVEL_MIN <= self.level <= CLASS_LEVEL_MAX):
            raise errors.InvalidParameter(
                f"class level {self.level} outside {CLASS_LEVEL_MIN}..{CLASS_LEVEL_MAX}"
            )
        if not self.label:
            object.__setattr__(self, "label", DEFAULT_CLASS_LABELS.get(self.level, f"class{self.level}"))

    def __eq__(self, other):
        if not isinstance(other, NodeClass):
            return NotImplemented
        return self.level == other.level

    def __lt__(self, other):
        if not isinstance(other, NodeClass):
            return NotImplemented
        return self.level < other.level

    def __hash__(self):
        return hash(self.level)

    def to_dict(self) -> dict:
        return {"level": self.level, "label": self.label}

    @classmethod
    def from_dict(cls, d) -> "NodeClass":
        if isinstance(d, int):
            return cls(level=d)
        return cls(level=int(d["level"]), label=d.get("label", ""))


@dataclass(frozen=True)
class NodeSpec:
    node_id: int
    node_class: NodeClass
    controller_id: int
    boot_ticks: int = 3

    def __post_init__(self):
        if self.node_id < 1:
            raise errors.InvalidParameter(f"node_id must be positive, got {self.node_id}")
        if self.boot_ticks < 1:
            raise errors.InvalidParameter(f"boot_ticks must be positive, got {self.boot_ticks}")

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "class": self.node_class.to_dict(),
            "controller_id": self.controller_id,
            "boot_ticks": self.boot_ticks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NodeSpec":
        return cls(
            node_id=int(d["node_id"]),
            node_class=NodeClass.from_dict(d["class"]),
            controller_id=int(d.get("controller_id", 0)),
            boot_ticks=int(d.get("boot_ticks", 3)),
        )


@dataclass(frozen=True)
class AdmissionPolicy:
    """Anonymous-user limits; 3 nodes / 72 hours reads the inclusive upper bounds."""

    max_nodes_anonymous: int = 3
    max_lease_hours_anonymous: int = 72
    max_active_blocks_per_user: int = 1

    def __post_init__(self):
        for name in ("max_nodes_anonymous", "max_lease_hours_anonymous", "max_active_blocks_per_user"):
            if getattr(self, name) < 1:
                raise errors.InvalidParameter(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_nodes_anonymous": self.max_nodes_anonymous,
            "max_lease_hours_anonymous": self.max_lease_hours_anonymous,
            "max_active_blocks_per_user": self.max_active_blocks_per_user,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdmissionPolicy":
        return cls(**{k: int(v) for k, v in d.items()})


@dataclass(frozen=True)
class ThermalParams:
    ambient_c: float = 25.0
    heat_idle: float = 0.5
    heat_loaded: float = 2.0
    cooling_coeff: float = 0.1
    overheat_trip_c: float = 70.0
    humidity_low_pct: float = 30.0
    humidity_high_pct: float = 70.0

    def __post_init__(self):
        if not (0.0 < self.cooling_coeff <= 1.0):
            raise errors.InvalidParameter(f"cooling_coeff must be in (0, 1], got {self.cooling_coeff}")
        if self.overheat_trip_c <= self.ambient_c:
            raise errors.InvalidParameter("overheat_trip_c must exceed ambient_c")
        if self.heat_idle < 0 or self.heat_loaded < 0:
            raise errors.InvalidParameter("heat rates must be >= 0")
        if not (0.0 <= self.humidity_low_pct <= self.humidity_high_pct <= 100.0):
            raise errors.InvalidParameter("humidity bounds must satisfy 0 <= low <= high <= 100")

    def to_dict(self) -> dict:
        return {
            "ambient_c": self.ambient_c,
            "heat_idle": self.heat_idle,
            "heat_loaded": self.heat_loaded,
            "cooling_coeff": self.cooling_coeff,
            "overheat_trip_c": self.overheat_trip_c,
            "humidity_low_pct": self.humidity_low_pct,
            "humidity_high_pct": self.humidity_high_pct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalParams":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class GaParams:
    population: int = 64
    generations: int = 200
    tournament_size: int = 3
    crossover_rate: float = 0.9
    gene_swap_prob: float = 0.5
    mutation_rate_per_gene: float = 0.02
    elitism: int = 2
    stall_limit: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise errors.InvalidParameter(f"population must be >= 2, got {self.population}")
        if not (0 <= self.elitism < self.population):
            raise errors.InvalidParameter("elitism must be in [0, population)")
        for name in ("crossover_rate", "gene_swap_prob", "mutation_rate_per_gene"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise errors.InvalidParameter(f"{name} must be in [0, 1], got {v}")
        if self.generations < 1 or self.tournament_size < 1 or self.stall_limit < 1:
            raise errors.InvalidParameter("generations, tournament_size and stall_limit must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise errors.InvalidParameter("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {
            "population": self.population,
            "generations": self.generations,
            "tournament_size": self.tournament_size,
            "crossover_rate": self.crossover_rate,
            "gene_swap_prob": self.gene_swap_prob,
            "mutation_rate_per_gene": self.mutation_rate_per_gene,
            "elitism": self.elitism,
            "stall_limit": self.stall_limit,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaParams":
        return cls(**d)


@dataclass(frozen=True)
class FitnessWeights:
    w_sat: int = 100
    w_over: int = 1
    w_power: int = 2
    w_dangle: int = 1

    def __post_init__(self):
        for name in ("w_sat", "w_over", "w_power", "w_dangle"):
            if getattr(self, name) < 0:
                raise errors.InvalidParameter(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {"w_sat": self.w_sat, "w_over": self.w_over, "w_power": self.w_power, "w_dangle": self.w_dangle}

    @classmethod
    def from_dict(cls, d: dict) -> "FitnessWeights":
        return cls(**{k: int(v) for k, v in d.items()})


@dataclass(frozen=True)
class ClusterConfig:
    nodes: tuple  # tuple[NodeSpec, ...]
    thermal: ThermalParams = ThermalParams()
    ga: GaParams = GaParams()
    weights: FitnessWeights = FitnessWeights()
    admission: AdmissionPolicy = AdmissionPolicy()
    tick_seconds: float = 1.0
    auto_allocate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.tick_seconds <= 0:
            raise errors.InvalidParameter(f"tick_seconds must be positive, got {self.tick_seconds}")
        seen = set()
        per_controller: dict = {}
        for spec in self.nodes:
            if spec.node_id in seen:
                raise errors.DuplicateNodeId(f"duplicate node_id {spec.node_id}")
            seen.add(spec.node_id)
            n = per_controller.get(spec.controller_id, 0) + 1
            per_controller[spec.controller_id] = n
            if n > CONTROLLER_NODE_LIMIT:
                raise errors.ControllerOverCapacity(
                    f"controller {spec.controller_id} binds more than {CONTROLLER_NODE_LIMIT} nodes"
                )

    def to_dict(self) -> dict:
        return {
            "nodes": [s.to_dict() for s in self.nodes],
            "thermal": self.thermal.to_dict(),
            "ga": self.ga.to_dict(),
            "weights": self.weights.to_dict(),
            "admission": self.admission.to_dict(),
            "tick_seconds": self.tick_seconds,
            "auto_allocate": self.auto_allocate,
        }


def parse_cluster_config(raw) -> ClusterConfig:
    """Parse and validate a JSON configuration document (bytes or str)."""
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    try:
        doc = json.loads(raw)
    except (ValueError, TypeError) as exc:
        raise errors.MalformedInput(f"bad JSON: {exc}")
    if not isinstance(doc, dict):
        raise errors.MalformedInput("top-level value must be an object")
    try:
        return ClusterConfig(
            nodes=tuple(NodeSpec.from_dict(n) for n in doc.get("nodes", [])),
            thermal=ThermalParams.from_dict(doc.get("thermal", {})),
            ga=GaParams.from_dict(doc.get("ga", {})),
            weights=FitnessWeights.from_dict(doc.get("weights", {})),
            admission=AdmissionPolicy.from_dict(doc.get("admission", {})),
            tick_seconds=float(doc.get("tick_seconds", 1.0)),
            auto_allocate=bool(doc.get("auto_allocate", False)),
        )
    except errors.ClusterError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.MalformedInput(f"bad config structure: {exc}")


def config_to_json(config: ClusterConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)
