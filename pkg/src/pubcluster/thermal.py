"""Per-node temperature/humidity simulation and automatic protection.

First-order linear thermal model: a powered node gains a constant heat
rate (load dependent) and sheds heat proportionally to its excess over
ambient. Under defaults a loaded node settles at ambient + 2.0/0.1 =
45 C, safely below the 70 C trip, so overheating only occurs through
injected faults (degraded fan coefficient).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import errors
from .domain import ThermalParams

FAULT_FAN_DEGRADED = "FanDegraded"
FAULT_NODE_FAILURE = "NodeFailure"

ALARM_OVERHEAT = "Overheat"
ALARM_HUMIDITY = "HumidityOutOfRange"
ALARM_NODE_FAILED = "NodeFailed"

ACTION_CUT_POWER = "CutPower"
ACTION_FAIL = "Fail"

HUMIDITY_STEP_PCT = 0.2


@dataclass
class Fault:
    kind: str  # FanDegraded | NodeFailure
    node_id: int
    param: Optional[float] = None  # FanDegraded: replacement cooling coefficient
    active: bool = True

    def validate(self, params: ThermalParams):
        if self.kind == FAULT_FAN_DEGRADED:
            if self.param is None or not (0.0 < self.param <= params.cooling_coeff):
                raise errors.InvalidParameter(
                    f"FanDegraded coefficient must be in (0, {params.cooling_coeff}]"
                )
        elif self.kind != FAULT_NODE_FAILURE:
            raise errors.InvalidParameter(f"unknown fault kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "node_id": self.node_id, "param": self.param, "active": self.active}


@dataclass(frozen=True)
class Alarm:
    kind: str
    node_id: int
    tick: int
    reading: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "node_id": self.node_id, "tick": self.tick, "reading": self.reading}


def step_temperature(
    t_c: float,
    powered: bool,
    loaded: bool,
    params: ThermalParams,
    active_fault: Optional[Fault] = None,
) -> float:
    """One tick of the thermal update rule."""
    c = params.cooling_coeff
    if active_fault is not None and active_fault.active and active_fault.kind == FAULT_FAN_DEGRADED:
        c = active_fault.param
    if not powered:
        return t_c - c * (t_c - params.ambient_c)
    h = params.heat_loaded if loaded else params.heat_idle
    return t_c + h - c * (t_c - params.ambient_c)


def step_humidity(h_pct: float, rng_draw: float) -> float:
    """One tick of the humidity random walk; rng_draw is in [-1, 1]."""
    return min(100.0, max(0.0, h_pct + HUMIDITY_STEP_PCT * rng_draw))


class ProtectionMonitor:
    """Raises alarms and protective actions, de-duplicated per excursion.

    An excursion is a maximal run of ticks with the reading out of range;
    each excursion yields at most one alarm of its kind per node.
    """

    def __init__(self):
        self._overheat_active: set[int] = set()
        self._humidity_active: set[int] = set()
        self._failed: set[int] = set()

    def evaluate(
        self,
        node_id: int,
        tick: int,
        temperature_c: float,
        humidity_pct: float,
        powered: bool,
        params: ThermalParams,
        active_fault: Optional[Fault] = None,
    ) -> list[tuple[Alarm, Optional[str]]]:
        out: list[tuple[Alarm, Optional[str]]] = []

        if active_fault is not None and active_fault.active and active_fault.kind == FAULT_NODE_FAILURE:
            if node_id not in self._failed:
                self._failed.add(node_id)
                out.append((Alarm(ALARM_NODE_FAILED, node_id, tick, temperature_c), ACTION_FAIL))
        else:
            self._failed.discard(node_id)

        # Excursions are tracked only while powered: the trip cuts power in
        # the same tick, so a powered node can never sit at/above the trip
        # point for two consecutive ticks.
        if powered and temperature_c >= params.overheat_trip_c:  # inclusive: fail-safe
            if node_id not in self._overheat_active:
                self._overheat_active.add(node_id)
                out.append((Alarm(ALARM_OVERHEAT, node_id, tick, temperature_c), ACTION_CUT_POWER))
        else:
            self._overheat_active.discard(node_id)

        if humidity_pct < params.humidity_low_pct or humidity_pct > params.humidity_high_pct:
            if node_id not in self._humidity_active:
                self._humidity_active.add(node_id)
                out.append((Alarm(ALARM_HUMIDITY, node_id, tick, humidity_pct), None))
        else:
            self._humidity_active.discard(node_id)

        return out
