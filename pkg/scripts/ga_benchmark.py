#!/usr/bin/env python3
"""Benchmark the GA allocator against the exhaustive oracle.

Generates seeded random instances small enough for the oracle, runs both
solvers, and reports agreement rate, mean optimality gap, and wall time.
"""

import argparse
import random
import statistics
import time

from pubcluster.allocator import LeaseRequest, PoolNode, evolve, oracle_optimal
from pubcluster.domain import FitnessWeights, GaParams, NodeClass


def random_instance(rng, max_pool, max_requests):
    pool = [
        PoolNode(i + 1, rng.randint(0, 3), rng.random() < 0.5)
        for i in range(rng.randint(1, max_pool))
    ]
    requests = [
        LeaseRequest(
            request_id=j + 1,
            user_token=f"u{j + 1}",
            node_count=rng.randint(1, 3),
            min_class=NodeClass(rng.randint(0, 3)),
            duration_hours=rng.randint(1, 72),
            priority=rng.randint(1, 10),
        )
        for j in range(rng.randint(1, max_requests))
    ]
    return pool, requests


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20260823)
    ap.add_argument("--max-pool", type=int, default=6)
    ap.add_argument("--max-requests", type=int, default=3)
    ap.add_argument("--generations", type=int, default=500)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    weights = FitnessWeights()
    agree = 0
    gaps = []
    ga_time = 0.0
    for trial in range(args.instances):
        pool, requests = random_instance(rng, args.max_pool, args.max_requests)
        best = oracle_optimal(pool, requests, weights)
        t0 = time.perf_counter()
        got = evolve(pool, requests, GaParams(seed=trial, generations=args.generations), weights)
        ga_time += time.perf_counter() - t0
        if got.fitness == best.fitness:
            agree += 1
        gaps.append(best.fitness - got.fitness)

    print(f"instances        : {args.instances}")
    print(f"oracle agreement : {agree}/{args.instances}")
    print(f"mean gap         : {statistics.mean(gaps):.2f}")
    print(f"max gap          : {max(gaps)}")
    print(f"GA wall time     : {ga_time:.2f}s ({ga_time / args.instances * 1000:.1f} ms/instance)")


if __name__ == "__main__":
    main()
