"""Append-only event log: wire format, file sink, gapless reader.

One event per line: ``{"seq":..,"tick":..,"kind":..,"payload":{..}}``
with that exact top-level field order; payload keys are sorted so two
runs producing the same history yield byte-identical logs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Optional

from . import errors

KIND_NODE_REGISTERED = "NodeRegistered"
KIND_POWER_CHANGED = "PowerChanged"
KIND_REQUEST_SUBMITTED = "RequestSubmitted"
KIND_REQUEST_REJECTED = "RequestRejected"
KIND_PLAN_PRODUCED = "PlanProduced"
KIND_BLOCK_ACTIVATED = "BlockActivated"
KIND_JOB_SUBMITTED = "JobSubmitted"
KIND_JOB_COMPLETED = "JobCompleted"
KIND_JOB_DEGRADED = "JobDegraded"
KIND_JOB_CANCELLED = "JobCancelled"
KIND_BLOCK_EXPIRED = "BlockExpired"
KIND_BLOCK_RELEASED = "BlockReleased"
KIND_ALARM_RAISED = "AlarmRaised"
KIND_FAULT_INJECTED = "FaultInjected"
KIND_TOKEN_ISSUED = "TokenIssued"

ALL_KINDS = frozenset(
    v for k, v in list(globals().items()) if k.startswith("KIND_")
)


@dataclass(frozen=True)
class Event:
    seq: int
    tick: int
    kind: str
    payload: dict

    def to_line(self) -> str:
        return '{"seq":%d,"tick":%d,"kind":%s,"payload":%s}' % (
            self.seq,
            self.tick,
            json.dumps(self.kind),
            json.dumps(self.payload, sort_keys=True, separators=(",", ":")),
        )

    def to_dict(self) -> dict:
        return {"seq": self.seq, "tick": self.tick, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_line(cls, line: str) -> "Event":
        try:
            d = json.loads(line)
            return cls(seq=int(d["seq"]), tick=int(d["tick"]), kind=d["kind"], payload=d["payload"])
        except (ValueError, KeyError, TypeError) as exc:
            raise errors.CorruptLog(f"malformed event line: {exc}")


class EventLogWriter:
    """File sink for the event log. ``fsync_policy`` is "always" or "never";
    ``fail_next`` lets tests simulate a storage failure."""

    def __init__(self, path: str, fsync_policy: str = "never"):
        self.path = path
        self.fsync_policy = fsync_policy
        self.fail_next = False
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, evs: Iterable[Event]):
        if self.fail_next:
            self.fail_next = False
            raise errors.StorageFailure("simulated storage failure")
        for ev in evs:
            self._fh.write(ev.to_line() + "\n")
        self._fh.flush()
        if self.fsync_policy == "always":
            os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()


def read_event_log(path_or_lines) -> list[Event]:
    """Parse an event log and verify the seq sequence is gapless from 1."""
    if isinstance(path_or_lines, (str, os.PathLike)):
        with open(path_or_lines, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    else:
        lines = [ln for ln in path_or_lines if ln.strip()]
    out = []
    for i, line in enumerate(lines, start=1):
        ev = Event.from_line(line)
        if ev.seq != i:
            raise errors.CorruptLog(f"seq gap: expected {i}, found {ev.seq}")
        if ev.kind not in ALL_KINDS:
            raise errors.CorruptLog(f"unknown event kind {ev.kind!r}")
        out.append(ev)
    return out
