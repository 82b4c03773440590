"""Event-log replay: reconstruct a world by re-executing its history.

Every command's first event identifies the command (the world emits it
first by contract), so replay walks the log, re-executes each command
against a fresh world and verifies that the regenerated events match
the log byte-for-byte. Events stamped with a future tick make replay
advance the clock first; the derived events of those ticks are matched
the same way. Any mismatch, gap or malformed line raises CorruptLog.

Ticks after the last logged event leave no trace in the log, so callers
that need them (e.g. comparing against a live world) pass ``final_tick``.
"""

from __future__ import annotations

from typing import Optional, Sequence

from . import errors
from .domain import ClusterConfig, NodeClass
from .events import (
    KIND_BLOCK_ACTIVATED,
    KIND_BLOCK_RELEASED,
    KIND_FAULT_INJECTED,
    KIND_JOB_SUBMITTED,
    KIND_NODE_REGISTERED,
    KIND_PLAN_PRODUCED,
    KIND_POWER_CHANGED,
    KIND_REQUEST_REJECTED,
    KIND_REQUEST_SUBMITTED,
    KIND_TOKEN_ISSUED,
    Event,
    read_event_log,
)
from .world import World


def replay(
    config: ClusterConfig,
    seed: int,
    event_log,
    final_tick: Optional[int] = None,
) -> World:
    """Rebuild the world from (config, seed) and a gapless event log.

    ``event_log`` is a path, an iterable of JSON lines, or a list of
    Event values.
    """
    if event_log and isinstance(event_log, Sequence) and isinstance(event_log[0], Event):
        log = list(event_log)
        for i, ev in enumerate(log, start=1):
            if ev.seq != i:
                raise errors.CorruptLog(f"seq gap: expected {i}, found {ev.seq}")
    else:
        log = read_event_log(event_log)

    world = World(config, seed)
    cursor = _match(world, log, 0)  # NodeRegistered events from the config

    while cursor < len(log):
        ev = log[cursor]
        if ev.tick > world.tick:
            mark = len(world.events)
            world.advance_tick(1)
            cursor = _match(world, log, cursor, mark)
            continue
        if ev.tick < world.tick:
            raise errors.CorruptLog(f"event seq {ev.seq} is stamped with a past tick")
        mark = len(world.events)
        _execute(world, ev)
        cursor = _match(world, log, cursor, mark)

    if final_tick is not None:
        if final_tick < world.tick:
            raise errors.CorruptLog(f"final_tick {final_tick} precedes log end {world.tick}")
        mark = len(world.events)
        world.advance_tick(final_tick - world.tick)
        if len(world.events) != mark:
            raise errors.CorruptLog("trailing ticks produced events missing from the log")
    return world


def _match(world: World, log: list, cursor: int, mark: int = 0) -> int:
    """Verify the events the world just regenerated against the log."""
    fresh = world.events[mark:]
    for ev in fresh:
        if cursor >= len(log):
            raise errors.CorruptLog(f"log ends early: expected seq {ev.seq} ({ev.kind})")
        logged = log[cursor]
        if ev.to_line() != logged.to_line():
            raise errors.CorruptLog(
                f"replay divergence at seq {logged.seq}: "
                f"log has {logged.kind}, replay produced {ev.kind}"
            )
        cursor += 1
    return cursor


def _execute(world: World, ev: Event):
    """Re-execute the command whose defining event is ``ev``."""
    p = ev.payload
    try:
        if ev.kind == KIND_TOKEN_ISSUED:
            world.issue_token(p["role"])
        elif ev.kind == KIND_NODE_REGISTERED:
            from .domain import NodeSpec

            world.register_node(NodeSpec.from_dict(p["spec"]))
        elif ev.kind == KIND_REQUEST_SUBMITTED:
            world.submit_request(
                p["user_token"],
                p["node_count"],
                NodeClass.from_dict(p["min_class"]),
                p["duration_hours"],
                p.get("priority", 1),
            )
        elif ev.kind == KIND_REQUEST_REJECTED:
            if p.get("cause") == "denied":
                world.deny_request(p["request_id"])
            else:
                try:
                    world.submit_request(
                        p["user_token"],
                        p["node_count"],
                        NodeClass.from_dict(p["min_class"]),
                        p["duration_hours"],
                        p.get("priority", 1),
                    )
                except errors.ClusterError as exc:
                    if exc.code != p.get("code"):
                        raise errors.CorruptLog(
                            f"seq {ev.seq}: rejection code {exc.code} != logged {p.get('code')}"
                        )
                else:
                    raise errors.CorruptLog(f"seq {ev.seq}: logged rejection was accepted on replay")
        elif ev.kind == KIND_PLAN_PRODUCED:
            world.run_allocation(trigger=p.get("trigger", "Admin"))
        elif ev.kind == KIND_BLOCK_ACTIVATED:
            world.activate_plan(p["plan_id"])
        elif ev.kind == KIND_JOB_SUBMITTED:
            world.submit_job(p["owner"], p["block_id"], p["width"], p["duration_ticks"])
        elif ev.kind == KIND_BLOCK_RELEASED and p.get("cause") in ("owner", "admin"):
            block = world.blocks.get(p["block_id"])
            if block is None:
                raise errors.CorruptLog(f"seq {ev.seq}: release of unknown block")
            actor = block.owner if p["cause"] == "owner" else _any_admin(world)
            world.release_block(actor, p["block_id"])
        elif ev.kind == KIND_POWER_CHANGED and p.get("cause") == "command":
            world.power_command(p["node_id"], on=p["on"], forced=p.get("forced", False))
        elif ev.kind == KIND_POWER_CHANGED and p.get("cause") == "reset":
            world.reset_node(p["node_id"])
        elif ev.kind == KIND_FAULT_INJECTED:
            world.inject_fault(p["node_id"], p["kind"], p.get("param"))
        else:
            raise errors.CorruptLog(
                f"seq {ev.seq}: {ev.kind} with payload cause {p.get('cause')!r} "
                "cannot start a command"
            )
    except errors.CorruptLog:
        raise
    except errors.ClusterError as exc:
        raise errors.CorruptLog(f"seq {ev.seq}: command replay failed with {exc.code}: {exc.message}")


def _any_admin(world: World) -> str:
    from .world import ROLE_ADMIN

    for value, token in world.tokens.items():
        if token.role == ROLE_ADMIN:
            return value
    raise errors.CorruptLog("admin release logged but no admin token exists")
