#!/usr/bin/env python3
"""Walk one full lease lifecycle in a simulated cluster and print the
event log as it grows: request -> plan -> block -> job -> fan fault ->
overheat trip -> release.
"""

import argparse

from pubcluster.domain import ClusterConfig, GaParams, NodeClass, NodeSpec
from pubcluster.world import World


def demo_config():
    nodes = tuple(
        NodeSpec(node_id=i + 1, node_class=NodeClass(level), controller_id=1)
        for i, level in enumerate((2, 1, 1))
    )
    return ClusterConfig(nodes=nodes, ga=GaParams(seed=42), tick_seconds=36.0)


def show(events):
    for ev in events:
        print(f"  #{ev.seq:<4} t={ev.tick:<5} {ev.kind:<16} {ev.payload}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    world = World(demo_config(), seed=args.seed)
    mark = 0

    def step(label):
        nonlocal mark
        print(f"\n== {label}")
        show(world.events[mark:])
        mark = len(world.events)

    user = world.issue_token("Anonymous").value
    step("anonymous token issued")

    world.submit_request(user, 2, NodeClass(1), duration_hours=24)
    plan_id, plan = world.run_allocation()
    step(f"request submitted; plan fitness={plan.fitness}")

    (block_id,) = world.activate_plan(plan_id)
    world.advance_tick(4)
    step(f"block {block_id} activated and booted")

    world.submit_job(user, block_id, width=1, duration_ticks=5)
    world.advance_tick(5)
    step("job ran to completion")

    victim = min(world.blocks[block_id].node_ids)
    world.submit_job(user, block_id, width=2, duration_ticks=10**6)
    world.advance_tick(100)  # reach the loaded thermal steady state
    world.inject_fault(victim, "FanDegraded", 0.02)
    world.advance_tick(20)
    mark = len([e for e in world.events if e.kind not in ("AlarmRaised", "PowerChanged", "JobDegraded")])
    print(f"\n== fan fault on node {victim}: trip trajectory")
    show([e for e in world.events if e.kind in ("FaultInjected", "AlarmRaised", "JobDegraded")])
    mark = len(world.events)

    world.release_block(user, block_id)
    world.advance_tick(2)
    step("block released")

    print(f"\nfinal tick {world.tick}, {len(world.events)} events, "
          f"{sum(1 for b in world.blocks.values() if b.state == 'Released')} block(s) released")


if __name__ == "__main__":
    main()
