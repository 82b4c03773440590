"""Live node state: power state machine, controller bindings, readings.

The registry is a single-writer store; every mutation goes through the
world's command queue. Power transitions are restricted to the legal
edge set below; anything else raises IllegalTransition.

Legal edges:
  Off -> Booting              (power-on)
  Booting -> Idle             (countdown reaches 0)
  Idle -> Reserved            (allocation)
  Reserved -> Loaded          (job start)
  Loaded -> Reserved          (job end)
  Reserved | Idle -> Draining (release / power-off)
  Loaded -> Draining          (forced power-off only)
  Draining -> Off
  any powered -> Overheated   (thermal trip, power cut)
  Overheated -> Off           (admin reset)
  any -> Failed               (fault injection)
  Failed -> Off               (admin reset)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import errors
from .domain import CONTROLLER_NODE_LIMIT, NodeSpec

DEFAULT_HUMIDITY_PCT = 50.0


class Power(str, Enum):
    OFF = "Off"
    BOOTING = "Booting"
    IDLE = "Idle"
    RESERVED = "Reserved"
    LOADED = "Loaded"
    DRAINING = "Draining"
    OVERHEATED = "Overheated"
    FAILED = "Failed"


POWERED_STATES = {Power.BOOTING, Power.IDLE, Power.RESERVED, Power.LOADED, Power.DRAINING}


@dataclass
class NodeRecord:
    spec: NodeSpec
    power: Power = Power.OFF
    boot_remaining: int = 0
    temperature_c: float = 25.0
    humidity_pct: float = DEFAULT_HUMIDITY_PCT
    block_id: Optional[int] = None

    @property
    def powered(self) -> bool:
        return self.power in POWERED_STATES

    def power_dict(self) -> dict:
        d = {"state": self.power.value}
        if self.power is Power.BOOTING:
            d["remaining"] = self.boot_remaining
        return d

    def to_dict(self) -> dict:
        return {
            "node_id": self.spec.node_id,
            "class": self.spec.node_class.to_dict(),
            "controller_id": self.spec.controller_id,
            "power": self.power_dict(),
            "temperature_c": self.temperature_c,
            "humidity_pct": self.humidity_pct,
            "block_id": self.block_id,
        }


class Registry:
    """Owns every NodeRecord; enforces uniqueness and controller capacity."""

    def __init__(self, ambient_c: float = 25.0):
        self.ambient_c = ambient_c
        self.nodes: dict[int, NodeRecord] = {}
        self._controller_counts: dict[int, int] = {}

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    def get(self, node_id: int) -> NodeRecord:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise errors.UnknownNode(f"no node {node_id}")

    def ordered(self) -> list[NodeRecord]:
        return [self.nodes[i] for i in sorted(self.nodes)]

    def register_node(self, spec: NodeSpec) -> NodeRecord:
        if spec.node_id in self.nodes:
            raise errors.DuplicateNodeId(f"node {spec.node_id} already registered")
        bound = self._controller_counts.get(spec.controller_id, 0)
        if bound >= CONTROLLER_NODE_LIMIT:
            raise errors.ControllerOverCapacity(
                f"controller {spec.controller_id} already binds {bound} nodes"
            )
        record = NodeRecord(spec=spec, power=Power.OFF, temperature_c=self.ambient_c)
        self.nodes[spec.node_id] = record
        self._controller_counts[spec.controller_id] = bound + 1
        return record

    def power_command(self, node_id: int, on: bool, forced: bool = False) -> Power:
        """Apply an On/Off command. Job accounting for forced-off of a Loaded
        node is the world's responsibility; this only moves the state."""
        rec = self.get(node_id)
        if on:
            if rec.power is Power.OFF:
                rec.power = Power.BOOTING
                rec.boot_remaining = rec.spec.boot_ticks
            elif rec.power in (Power.BOOTING, Power.IDLE, Power.RESERVED, Power.LOADED):
                pass  # already on or heading there
            else:
                raise errors.IllegalTransition(
                    f"cannot power on node {node_id} in state {rec.power.value}"
                )
        else:
            if rec.power in (Power.OFF, Power.DRAINING):
                pass  # already off or heading there
            elif rec.power in (Power.IDLE, Power.RESERVED):
                rec.power = Power.DRAINING
                rec.block_id = None
            elif rec.power is Power.LOADED:
                if not forced:
                    raise errors.RefusedBusy(f"node {node_id} is Loaded; use forced")
                rec.power = Power.DRAINING
                rec.block_id = None
            else:
                raise errors.IllegalTransition(
                    f"cannot power off node {node_id} in state {rec.power.value}; reset required"
                )
        return rec.power

    def step_power(self, node_id: int) -> Power:
        """Advance one tick of the autonomous power dynamics."""
        rec = self.get(node_id)
        if rec.power is Power.BOOTING:
            rec.boot_remaining -= 1
            if rec.boot_remaining <= 0:
                rec.power = Power.IDLE
                rec.boot_remaining = 0
        elif rec.power is Power.DRAINING:
            rec.power = Power.OFF
        return rec.power

    def reserve(self, node_id: int, block_id: int):
        rec = self.get(node_id)
        if rec.power is not Power.IDLE:
            raise errors.IllegalTransition(f"node {node_id} not Idle")
        rec.power = Power.RESERVED
        rec.block_id = block_id

    def load(self, node_id: int):
        rec = self.get(node_id)
        if rec.power is not Power.RESERVED:
            raise errors.IllegalTransition(f"node {node_id} not Reserved")
        rec.power = Power.LOADED

    def unload(self, node_id: int):
        rec = self.get(node_id)
        if rec.power is not Power.LOADED:
            raise errors.IllegalTransition(f"node {node_id} not Loaded")
        rec.power = Power.RESERVED

    def trip_overheat(self, node_id: int) -> Power:
        rec = self.get(node_id)
        if not rec.powered:
            raise errors.IllegalTransition(f"node {node_id} is not powered")
        rec.power = Power.OVERHEATED
        rec.boot_remaining = 0
        rec.block_id = None
        return rec.power

    def fail(self, node_id: int) -> Power:
        rec = self.get(node_id)
        rec.power = Power.FAILED
        rec.boot_remaining = 0
        rec.block_id = None
        return rec.power

    def reset(self, node_id: int) -> Power:
        rec = self.get(node_id)
        if rec.power not in (Power.OVERHEATED, Power.FAILED):
            raise errors.IllegalTransition(
                f"reset only applies to Overheated/Failed, node {node_id} is {rec.power.value}"
            )
        rec.power = Power.OFF
        return rec.power
