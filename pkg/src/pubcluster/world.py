"""Multi-block lifecycle and the global tick engine.

The world is the single mutable aggregate: registry, tokens, requests,
plans, blocks, jobs, faults and the event log. Every mutation happens
through a command method here, and every completed command appends its
events before returning, with the command's defining event first (the
replay machinery in ``replay.py`` relies on that ordering).

Tick sub-step order is fixed: power countdowns, provisioning promotion,
thermal/humidity, protection, job countdown, lease expiry, block
retirement, optional auto-allocation. Nodes are always visited in
ascending node_id, blocks and jobs in ascending id.

Two independent PRNG streams derive from the world seed: one for
simulation noise (humidity draws, one per node per tick, powered or
not), one for token generation. Keeping token issuance off the
simulation stream means erasing one user's commands cannot perturb
another block's sensor trajectory.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from . import allocator, errors, events, thermal
from .allocator import AllocationPlan, LeaseRequest, PoolNode
from .domain import ClusterConfig, NodeClass, NodeSpec
from .events import (
    KIND_ALARM_RAISED,
    KIND_BLOCK_ACTIVATED,
    KIND_BLOCK_EXPIRED,
    KIND_BLOCK_RELEASED,
    KIND_FAULT_INJECTED,
    KIND_JOB_CANCELLED,
    KIND_JOB_COMPLETED,
    KIND_JOB_DEGRADED,
    KIND_JOB_SUBMITTED,
    KIND_NODE_REGISTERED,
    KIND_PLAN_PRODUCED,
    KIND_POWER_CHANGED,
    KIND_REQUEST_REJECTED,
    KIND_REQUEST_SUBMITTED,
    KIND_TOKEN_ISSUED,
    Event,
)
from .registry import Power, Registry
from .thermal import ACTION_CUT_POWER, ACTION_FAIL, Fault, ProtectionMonitor

ROLE_ANONYMOUS = "Anonymous"
ROLE_PRIVILEGED = "Privileged"
ROLE_ADMIN = "Admin"
ROLES = (ROLE_ANONYMOUS, ROLE_PRIVILEGED, ROLE_ADMIN)

BLOCK_PROVISIONING = "Provisioning"
BLOCK_ACTIVE = "Active"
BLOCK_EXPIRED = "Expired"
BLOCK_RELEASED = "Released"

JOB_RUNNING = "Running"
JOB_DONE = "Done"
JOB_DEGRADED = "Degraded"
JOB_CANCELLED = "Cancelled"

REQ_PENDING = "Pending"
REQ_REJECTED = "Rejected"
REQ_ALLOCATED = "Allocated"

_TOKEN_STREAM_SALT = 0x9E3779B97F4A7C15


@dataclass
class Token:
    value: str
    role: str
    issued_at_tick: int

    def to_dict(self) -> dict:
        return {"value": self.value, "role": self.role, "issued_at_tick": self.issued_at_tick}


@dataclass
class RequestEntry:
    request: LeaseRequest
    status: str = REQ_PENDING
    block_id: Optional[int] = None

    def to_dict(self) -> dict:
        d = self.request.to_dict()
        d["status"] = self.status
        d["block_id"] = self.block_id
        return d


@dataclass
class Block:
    block_id: int
    owner: str
    node_ids: set
    head_node: int
    expires_at_tick: int
    state: str
    request_id: int
    expired_at_tick: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "owner": self.owner,
            "node_ids": sorted(self.node_ids),
            "head_node": self.head_node,
            "expires_at_tick": self.expires_at_tick,
            "state": self.state,
            "request_id": self.request_id,
            "expired_at_tick": self.expired_at_tick,
        }


@dataclass
class Job:
    job_id: int
    block_id: int
    owner: str
    width: int
    duration_ticks: int
    remaining_ticks: int
    state: str
    node_ids: set
    was_degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "block_id": self.block_id,
            "owner": self.owner,
            "width": self.width,
            "duration_ticks": self.duration_ticks,
            "remaining_ticks": self.remaining_ticks,
            "state": self.state,
            "node_ids": sorted(self.node_ids),
            "was_degraded": self.was_degraded,
        }


class World:
    """Deterministic function of (config, seed, command history)."""

    def __init__(self, config: ClusterConfig, seed: int):
        self.config = config
        self.seed = seed
        self.tick = 0
        self.rng = random.Random(seed)
        self.token_rng = random.Random(seed ^ _TOKEN_STREAM_SALT)
        self.registry = Registry(ambient_c=config.thermal.ambient_c)
        self.monitor = ProtectionMonitor()
        self.tokens: dict[str, Token] = {}
        self.requests: dict[int, RequestEntry] = {}
        self.pending: list[int] = []
        self.plans: dict[int, AllocationPlan] = {}
        self.activated_plans: set[int] = set()
        self.blocks: dict[int, Block] = {}
        self.jobs: dict[int, Job] = {}
        self.faults: dict[int, Fault] = {}
        self.events: list[Event] = []
        self._seq = 0
        self._next_request_id = 1
        self._next_plan_id = 1
        self._next_block_id = 1
        self._next_job_id = 1
        for spec in config.nodes:
            self.register_node(spec)

    # ------------------------------------------------------------------ events

    def _emit(self, kind: str, payload: dict) -> Event:
        self._seq += 1
        ev = Event(seq=self._seq, tick=self.tick, kind=kind, payload=payload)
        self.events.append(ev)
        return ev

    def _emit_power(self, node_id: int, old: Power, new: Power, cause: str, **extra):
        payload = {"node_id": node_id, "from": old.value, "to": new.value, "cause": cause}
        payload.update(extra)
        self._emit(KIND_POWER_CHANGED, payload)

    # ---------------------------------------------------------------- commands

    def register_node(self, spec: NodeSpec):
        record = self.registry.register_node(spec)
        self._emit(KIND_NODE_REGISTERED, {"spec": spec.to_dict()})
        return record

    def issue_token(self, role: str) -> Token:
        if role not in ROLES:
            raise errors.InvalidParameter(f"unknown role {role!r}")
        value = f"{self.token_rng.getrandbits(128):032x}"
        token = Token(value=value, role=role, issued_at_tick=self.tick)
        self.tokens[value] = token
        self._emit(KIND_TOKEN_ISSUED, {"value": value, "role": role})
        return token

    def get_token(self, value: Optional[str]) -> Token:
        token = self.tokens.get(value or "")
        if token is None:
            raise errors.Unauthorized("unknown or missing token")
        return token

    def _active_blocks_of(self, owner: str) -> int:
        return sum(
            1
            for b in self.blocks.values()
            if b.owner == owner and b.state in (BLOCK_PROVISIONING, BLOCK_ACTIVE)
        )

    def submit_request(
        self,
        token_value: str,
        node_count: int,
        min_class: NodeClass,
        duration_hours: int,
        priority: int = 1,
    ) -> int:
        token = self.get_token(token_value)
        request = LeaseRequest(  # raises InvalidRequest before any state change
            request_id=self._next_request_id,
            user_token=token.value,
            node_count=node_count,
            min_class=min_class,
            duration_hours=duration_hours,
            priority=priority,
        )
        policy = self.config.admission
        rejection = None
        if token.role == ROLE_ANONYMOUS:
            if node_count > policy.max_nodes_anonymous:
                rejection = errors.LimitNodes(
                    f"anonymous users may request at most {policy.max_nodes_anonymous} nodes"
                )
            elif duration_hours > policy.max_lease_hours_anonymous:
                rejection = errors.LimitDuration(
                    f"anonymous leases are capped at {policy.max_lease_hours_anonymous} hours"
                )
        if rejection is None and self._active_blocks_of(token.value) >= policy.max_active_blocks_per_user:
            rejection = errors.LimitConcurrentBlocks(
                f"at most {policy.max_active_blocks_per_user} active block(s) per user"
            )

        self._next_request_id += 1
        if rejection is not None:
            self.requests[request.request_id] = RequestEntry(request=request, status=REQ_REJECTED)
            payload = request.to_dict()
            payload.update({"cause": "admission", "code": rejection.code})
            self._emit(KIND_REQUEST_REJECTED, payload)
            rejection.details["request_id"] = request.request_id
            raise rejection
        self.requests[request.request_id] = RequestEntry(request=request, status=REQ_PENDING)
        self.pending.append(request.request_id)
        self._emit(KIND_REQUEST_SUBMITTED, request.to_dict())
        return request.request_id

    def deny_request(self, request_id: int):
        entry = self.requests.get(request_id)
        if entry is None or entry.status != REQ_PENDING:
            raise errors.UnknownRequestId(f"no pending request {request_id}")
        entry.status = REQ_REJECTED
        self.pending.remove(request_id)
        self._emit(
            KIND_REQUEST_REJECTED,
            {"request_id": request_id, "cause": "denied", "code": "Denied"},
        )

    def _eligible_pool(self) -> list[PoolNode]:
        pool = []
        for rec in self.registry.ordered():
            if rec.power in (Power.IDLE, Power.OFF) and rec.block_id is None:
                if not self._committed(rec.spec.node_id):
                    pool.append(
                        PoolNode(rec.spec.node_id, rec.spec.node_class.level, rec.power is Power.OFF)
                    )
        return pool

    def _committed(self, node_id: int) -> bool:
        """Node is promised to a non-retired block even if not yet Reserved."""
        return any(
            node_id in b.node_ids
            for b in self.blocks.values()
            if b.state in (BLOCK_PROVISIONING, BLOCK_ACTIVE)
        )

    def run_allocation(self, trigger: str = "Admin") -> tuple[Optional[int], AllocationPlan]:
        if not self.pending:
            empty = AllocationPlan(assignments={}, fitness=0, satisfied=frozenset(), generations_run=0)
            return None, empty
        reqs = [self.requests[rid].request for rid in sorted(self.pending)]
        plan = allocator.evolve(self._eligible_pool(), reqs, self.config.ga, self.config.weights)
        plan_id = self._next_plan_id
        self._next_plan_id += 1
        self.plans[plan_id] = plan
        payload = plan.to_dict()
        payload.update({"plan_id": plan_id, "trigger": trigger})
        self._emit(KIND_PLAN_PRODUCED, payload)
        return plan_id, plan

    def activate_plan(self, plan_id: int) -> list[int]:
        plan = self.plans.get(plan_id)
        if plan is None:
            raise errors.UnknownPlan(f"no plan {plan_id}")
        if plan_id in self.activated_plans:
            raise errors.StalePlan(f"plan {plan_id} was already activated")
        if not plan.satisfied:
            # nothing to build; activating would leave no trace in the log
            raise errors.StalePlan(f"plan {plan_id} satisfies no request")
        eligible_ids = {n.node_id for n in self._eligible_pool()}
        for req_id in sorted(plan.satisfied):
            entry = self.requests.get(req_id)
            if entry is None or entry.status != REQ_PENDING:
                raise errors.StalePlan(f"request {req_id} no longer pending")
            for node_id in plan.assignments[req_id]:
                if node_id not in eligible_ids:
                    raise errors.StalePlan(f"node {node_id} no longer eligible")

        self.activated_plans.add(plan_id)
        block_ids = []
        for req_id in sorted(plan.satisfied):
            entry = self.requests[req_id]
            node_ids = set(plan.assignments[req_id])
            block_id = self._next_block_id
            self._next_block_id += 1
            expires = self.tick + math.ceil(
                entry.request.duration_hours * 3600 / self.config.tick_seconds
            )
            transitions = []
            all_reserved = True
            for node_id in sorted(node_ids):
                rec = self.registry.get(node_id)
                old = rec.power
                if rec.power is Power.IDLE:
                    self.registry.reserve(node_id, block_id)
                else:  # Off: power on, Reserved once booted
                    self.registry.power_command(node_id, on=True)
                    rec.block_id = block_id
                    all_reserved = False
                transitions.append((node_id, old, rec.power))
            block = Block(
                block_id=block_id,
                owner=entry.request.user_token,
                node_ids=node_ids,
                head_node=min(node_ids),
                expires_at_tick=expires,
                state=BLOCK_ACTIVE if all_reserved else BLOCK_PROVISIONING,
                request_id=req_id,
            )
            self.blocks[block_id] = block
            entry.status = REQ_ALLOCATED
            entry.block_id = block_id
            self.pending.remove(req_id)
            self._emit(
                KIND_BLOCK_ACTIVATED,
                {
                    "plan_id": plan_id,
                    "block_id": block_id,
                    "request_id": req_id,
                    "owner": block.owner,
                    "node_ids": sorted(node_ids),
                    "head_node": block.head_node,
                    "expires_at_tick": expires,
                    "state": block.state,
                },
            )
            for node_id, old, new in transitions:
                self._emit_power(node_id, old, new, "activation")
            block_ids.append(block_id)
        return block_ids

    def submit_job(self, token_value: str, block_id: int, width: int, duration_ticks: int) -> int:
        token = self.get_token(token_value)
        block = self.blocks.get(block_id)
        if block is None:
            raise errors.UnknownBlock(f"no block {block_id}")
        if block.owner != token.value and token.role != ROLE_ADMIN:
            raise errors.NotOwner(f"block {block_id} is not owned by this token")
        if block.state != BLOCK_ACTIVE:
            raise errors.BlockNotActive(f"block {block_id} is {block.state}")
        if width < 1 or duration_ticks < 1:
            raise errors.InvalidRequest("width and duration_ticks must be >= 1")
        if width > len(block.node_ids):
            raise errors.WidthExceedsBlock(
                f"width {width} exceeds block size {len(block.node_ids)}"
            )
        free = [
            nid
            for nid in sorted(block.node_ids)
            if self.registry.get(nid).power is Power.RESERVED
        ]
        if width > len(free):
            raise errors.WidthExceedsBlock(
                f"width {width} exceeds the {len(free)} unoccupied node(s) of block {block_id}"
            )
        chosen = free[:width]
        job_id = self._next_job_id
        self._next_job_id += 1
        job = Job(
            job_id=job_id,
            block_id=block_id,
            owner=block.owner,
            width=width,
            duration_ticks=duration_ticks,
            remaining_ticks=duration_ticks,
            state=JOB_RUNNING,
            node_ids=set(chosen),
        )
        self.jobs[job_id] = job
        self._emit(
            KIND_JOB_SUBMITTED,
            {
                "job_id": job_id,
                "block_id": block_id,
                "owner": block.owner,
                "width": width,
                "duration_ticks": duration_ticks,
                "node_ids": chosen,
            },
        )
        for nid in chosen:
            self.registry.load(nid)
            self._emit_power(nid, Power.RESERVED, Power.LOADED, "job-start")
        return job_id

    def release_block(self, token_value: str, block_id: int):
        token = self.get_token(token_value)
        block = self.blocks.get(block_id)
        if block is None:
            raise errors.UnknownBlock(f"no block {block_id}")
        if block.owner != token.value and token.role != ROLE_ADMIN:
            raise errors.NotOwner(f"block {block_id} is not owned by this token")
        if block.state not in (BLOCK_PROVISIONING, BLOCK_ACTIVE):
            raise errors.BlockNotActive(f"block {block_id} is {block.state}")
        cause = "admin" if token.role == ROLE_ADMIN and token.value != block.owner else "owner"
        self._emit(KIND_BLOCK_RELEASED, {"block_id": block_id, "cause": cause})
        self._retire_block(block)

    def _retire_block(self, block: Block):
        """Cancel jobs and drain nodes; caller emits the block-level event."""
        for job in self._block_jobs(block.block_id):
            job.state = JOB_CANCELLED
            self._emit(KIND_JOB_CANCELLED, {"job_id": job.job_id, "block_id": block.block_id})
        for nid in sorted(block.node_ids):
            rec = self.registry.get(nid)
            if rec.power in (Power.RESERVED, Power.LOADED):
                old = rec.power
                rec.power = Power.DRAINING
                rec.block_id = None
                self._emit_power(nid, old, Power.DRAINING, "release")
            else:
                # Booting nodes of a Provisioning block finish booting to
                # Idle; they just stop belonging to the block.
                rec.block_id = None
        block.state = BLOCK_RELEASED

    def _block_jobs(self, block_id: int) -> list[Job]:
        return [
            self.jobs[jid]
            for jid in sorted(self.jobs)
            if self.jobs[jid].block_id == block_id
            and self.jobs[jid].state in (JOB_RUNNING, JOB_DEGRADED)
        ]

    def power_command(self, node_id: int, on: bool, forced: bool = False) -> Power:
        rec = self.registry.get(node_id)
        old = rec.power
        new = self.registry.power_command(node_id, on=on, forced=forced)
        if new != old:
            self._emit_power(node_id, old, new, "command", on=on, forced=forced)
            if old in (Power.RESERVED, Power.LOADED, Power.BOOTING):
                self._handle_power_loss(node_id, old)
        return new

    def reset_node(self, node_id: int) -> Power:
        rec = self.registry.get(node_id)
        old = rec.power
        new = self.registry.reset(node_id)
        self.faults.pop(node_id, None)
        self._emit_power(node_id, old, new, "reset")
        return new

    def inject_fault(self, node_id: int, kind: str, param: Optional[float] = None) -> Fault:
        self.registry.get(node_id)  # UnknownNode check
        fault = Fault(kind=kind, node_id=node_id, param=param)
        fault.validate(self.config.thermal)
        self.faults[node_id] = fault
        self._emit(KIND_FAULT_INJECTED, {"node_id": node_id, "kind": kind, "param": param})
        return fault

    def _handle_power_loss(self, node_id: int, old_power: Power):
        """A Reserved/Loaded node lost power: shrink its block, degrade its job."""
        block = next(
            (
                b
                for b in self.blocks.values()
                if node_id in b.node_ids and b.state in (BLOCK_PROVISIONING, BLOCK_ACTIVE)
            ),
            None,
        )
        if block is None:
            return
        for job in self._block_jobs(block.block_id):
            if node_id in job.node_ids:
                job.node_ids.discard(node_id)
                if job.state == JOB_RUNNING:
                    job.state = JOB_DEGRADED
                    job.was_degraded = True
                    self._emit(
                        KIND_JOB_DEGRADED,
                        {"job_id": job.job_id, "block_id": block.block_id, "node_id": node_id},
                    )
        block.node_ids.discard(node_id)
        if not block.node_ids:
            self._emit(KIND_BLOCK_RELEASED, {"block_id": block.block_id, "cause": "degraded"})
            for job in self._block_jobs(block.block_id):
                job.state = JOB_CANCELLED
                self._emit(KIND_JOB_CANCELLED, {"job_id": job.job_id, "block_id": block.block_id})
            block.state = BLOCK_RELEASED
        elif block.head_node == node_id:
            block.head_node = min(block.node_ids)

    # -------------------------------------------------------------- tick engine

    def advance_tick(self, n: int = 1) -> list[Event]:
        start = len(self.events)
        for _ in range(n):
            self._one_tick()
        return self.events[start:]

    def _one_tick(self):
        self.tick += 1
        reg = self.registry

        # (1) autonomous power dynamics
        for rec in reg.ordered():
            old = rec.power
            new = reg.step_power(rec.spec.node_id)
            if new != old:
                self._emit_power(rec.spec.node_id, old, new, "tick")

        # (1b) provisioning promotion: freshly Idle committed nodes -> Reserved
        for bid in sorted(self.blocks):
            block = self.blocks[bid]
            if block.state != BLOCK_PROVISIONING:
                continue
            for nid in sorted(block.node_ids):
                rec = reg.get(nid)
                if rec.power is Power.IDLE and rec.block_id == bid:
                    reg.reserve(nid, bid)
                    self._emit_power(nid, Power.IDLE, Power.RESERVED, "provision")
            if all(
                reg.get(nid).power in (Power.RESERVED, Power.LOADED) for nid in block.node_ids
            ):
                block.state = BLOCK_ACTIVE

        # (2) thermal and humidity; one humidity draw per node, powered or not
        params = self.config.thermal
        for rec in reg.ordered():
            fault = self.faults.get(rec.spec.node_id)
            rec.temperature_c = thermal.step_temperature(
                rec.temperature_c, rec.powered, rec.power is Power.LOADED, params, fault
            )
            rec.humidity_pct = thermal.step_humidity(rec.humidity_pct, self.rng.uniform(-1.0, 1.0))

        # (3) protection: alarms and automatic power cuts
        for rec in reg.ordered():
            nid = rec.spec.node_id
            pairs = self.monitor.evaluate(
                nid,
                self.tick,
                rec.temperature_c,
                rec.humidity_pct,
                rec.powered,
                params,
                self.faults.get(nid),
            )
            for alarm, action in pairs:
                self._emit(KIND_ALARM_RAISED, alarm.to_dict())
                if action is None:
                    continue
                old = rec.power
                if action == ACTION_CUT_POWER:
                    reg.trip_overheat(nid)
                elif action == ACTION_FAIL:
                    reg.fail(nid)
                self._emit_power(nid, old, rec.power, "protection")
                if old in (Power.RESERVED, Power.LOADED, Power.BOOTING):
                    self._handle_power_loss(nid, old)

        # (4) job countdown; degraded jobs keep running on remaining nodes
        for jid in sorted(self.jobs):
            job = self.jobs[jid]
            if job.state not in (JOB_RUNNING, JOB_DEGRADED):
                continue
            job.remaining_ticks -= 1
            if job.remaining_ticks <= 0:
                job.state = JOB_DONE
                self._emit(
                    KIND_JOB_COMPLETED,
                    {"job_id": jid, "block_id": job.block_id, "degraded": job.was_degraded},
                )
                for nid in sorted(job.node_ids):
                    if reg.get(nid).power is Power.LOADED:
                        reg.unload(nid)
                        self._emit_power(nid, Power.LOADED, Power.RESERVED, "job-complete")

        # (5) lease expiry
        for bid in sorted(self.blocks):
            block = self.blocks[bid]
            if block.state in (BLOCK_PROVISIONING, BLOCK_ACTIVE) and block.expires_at_tick <= self.tick:
                for job in self._block_jobs(bid):
                    job.state = JOB_CANCELLED
                    self._emit(KIND_JOB_CANCELLED, {"job_id": job.job_id, "block_id": bid})
                for nid in sorted(block.node_ids):
                    rec = reg.get(nid)
                    if rec.power in (Power.RESERVED, Power.LOADED):
                        old = rec.power
                        rec.power = Power.DRAINING
                        rec.block_id = None
                        self._emit_power(nid, old, Power.DRAINING, "expiry")
                    else:
                        # Booting members of a Provisioning block finish
                        # booting to Idle, detached from the dead lease.
                        rec.block_id = None
                block.state = BLOCK_EXPIRED
                block.expired_at_tick = self.tick
                self._emit(KIND_BLOCK_EXPIRED, {"block_id": bid})

        # (5b) expired blocks retire fully once their drain tick has passed
        for bid in sorted(self.blocks):
            block = self.blocks[bid]
            if block.state == BLOCK_EXPIRED and block.expired_at_tick < self.tick:
                block.state = BLOCK_RELEASED
                self._emit(KIND_BLOCK_RELEASED, {"block_id": bid, "cause": "expired"})

        # (6) optional auto allocation
        if self.config.auto_allocate and self.pending:
            plan_id, plan = self.run_allocation(trigger="Auto")
            if plan_id is not None and plan.satisfied:
                try:
                    self.activate_plan(plan_id)
                except errors.StalePlan:
                    pass

    # ------------------------------------------------------------- observation

    def canonical_state(self) -> dict:
        """Complete material state; equal dicts mean equal worlds."""
        return {
            "tick": self.tick,
            "seq": self._seq,
            "nodes": [r.to_dict() for r in self.registry.ordered()],
            "tokens": [self.tokens[v].to_dict() for v in sorted(self.tokens)],
            "requests": [self.requests[r].to_dict() for r in sorted(self.requests)],
            "pending": sorted(self.pending),
            "plans": {str(p): self.plans[p].to_dict() for p in sorted(self.plans)},
            "activated_plans": sorted(self.activated_plans),
            "blocks": [self.blocks[b].to_dict() for b in sorted(self.blocks)],
            "jobs": [self.jobs[j].to_dict() for j in sorted(self.jobs)],
            "faults": [self.faults[n].to_dict() for n in sorted(self.faults)],
            "counters": [
                self._next_request_id,
                self._next_plan_id,
                self._next_block_id,
                self._next_job_id,
            ],
            "rng": hash(self.rng.getstate()) & 0xFFFFFFFFFFFFFFFF,
            "token_rng": hash(self.token_rng.getstate()) & 0xFFFFFFFFFFFFFFFF,
        }
