"""Genetic-algorithm node allocation with repair, plus an exhaustive oracle.

A chromosome is node-indexed: one gene per pool node (ascending node_id),
each gene naming the request the node is assigned to (0 = unassigned).
Disjointness therefore holds by construction; repair only enforces
per-request count and class eligibility.

Randomness comes from ``random.Random`` (CPython's Mersenne Twister)
seeded with the 64-bit ``GaParams.seed``; equal inputs and seed yield
bit-identical plans.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from . import errors
from .domain import FitnessWeights, GaParams, NodeClass

ORACLE_MAX_VECTORS = 10**7


class PoolNode(NamedTuple):
    """Allocation view of a node: identity, class rank, power-on cost."""

    node_id: int
    class_level: int
    is_off: bool


@dataclass(frozen=True)
class LeaseRequest:
    request_id: int
    user_token: str
    node_count: int
    min_class: NodeClass
    duration_hours: int
    priority: int = 1

    def __post_init__(self):
        if self.request_id < 1:
            raise errors.InvalidRequest(f"request_id must be positive, got {self.request_id}")
        if self.node_count < 1:
            raise errors.InvalidRequest(f"node_count must be >= 1, got {self.node_count}")
        if self.duration_hours < 1:
            raise errors.InvalidRequest(f"duration_hours must be >= 1, got {self.duration_hours}")
        if not (1 <= self.priority <= 10):
            raise errors.InvalidRequest(f"priority must be in 1..10, got {self.priority}")

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "user_token": self.user_token,
            "node_count": self.node_count,
            "min_class": self.min_class.to_dict(),
            "duration_hours": self.duration_hours,
            "priority": self.priority,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LeaseRequest":
        return cls(
            request_id=int(d["request_id"]),
            user_token=d["user_token"],
            node_count=int(d["node_count"]),
            min_class=NodeClass.from_dict(d["min_class"]),
            duration_hours=int(d["duration_hours"]),
            priority=int(d.get("priority", 1)),
        )


@dataclass(frozen=True)
class AllocationPlan:
    assignments: dict  # request_id -> frozenset[node_id], satisfied requests only
    fitness: int
    satisfied: frozenset
    generations_run: int = 0

    def to_dict(self) -> dict:
        return {
            "assignments": {str(r): sorted(ns) for r, ns in sorted(self.assignments.items())},
            "fitness": self.fitness,
            "satisfied": sorted(self.satisfied),
            "generations_run": self.generations_run,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AllocationPlan":
        return cls(
            assignments={int(r): frozenset(ns) for r, ns in d["assignments"].items()},
            fitness=int(d["fitness"]),
            satisfied=frozenset(d["satisfied"]),
            generations_run=int(d.get("generations_run", 0)),
        )


class _Instance:
    """Preprocessed pool/request arrays shared by fitness and repair."""

    def __init__(self, pool: Sequence[PoolNode], requests: Sequence[LeaseRequest]):
        self.pool = sorted(pool, key=lambda n: n.node_id)
        self.ids = [n.node_id for n in self.pool]
        self.levels = [n.class_level for n in self.pool]
        self.off = [n.is_off for n in self.pool]
        self.requests = {r.request_id: r for r in requests}
        self.by_req = {
            r.request_id: (r.node_count, r.min_class.level, r.priority) for r in requests
        }
        self.gene_choices = [0] + sorted(self.requests)

    def check(self, genes: Sequence[int]):
        if len(genes) != len(self.pool):
            raise errors.LengthMismatch(
                f"chromosome length {len(genes)} != pool size {len(self.pool)}"
            )
        for g in genes:
            if g != 0 and g not in self.requests:
                raise errors.UnknownRequestId(f"gene names unknown request {g}")


def fitness(
    genes: Sequence[int],
    pool: Sequence[PoolNode],
    requests: Sequence[LeaseRequest],
    weights: FitnessWeights,
) -> int:
    inst = _Instance(pool, requests)
    inst.check(genes)
    return _fitness(inst, genes, weights)


def _fitness(inst: _Instance, genes: Sequence[int], weights: FitnessWeights) -> int:
    # group assigned pool indexes per request
    groups: dict[int, list[int]] = {}
    for i, g in enumerate(genes):
        if g:
            groups.setdefault(g, []).append(i)
    score = 0
    for req_id, idxs in groups.items():
        k, min_level, priority = inst.by_req[req_id]
        eligible = all(inst.levels[i] >= min_level for i in idxs)
        if eligible and len(idxs) == k:
            score += weights.w_sat * priority
            score -= weights.w_over * sum(inst.levels[i] - min_level for i in idxs)
        else:
            score -= weights.w_dangle * len(idxs)
        score -= weights.w_power * sum(1 for i in idxs if inst.off[i])
    return score


def repair(
    genes: Sequence[int],
    pool: Sequence[PoolNode],
    requests: Sequence[LeaseRequest],
) -> tuple:
    inst = _Instance(pool, requests)
    inst.check(genes)
    return _repair(inst, genes)


def _repair(inst: _Instance, genes: Sequence[int]) -> tuple:
    out = list(genes)
    groups: dict[int, list[int]] = {}
    for i, g in enumerate(out):
        if not g:
            continue
        k, min_level, _ = inst.by_req[g]
        if inst.levels[i] < min_level:
            out[i] = 0  # class-ineligible
        else:
            groups.setdefault(g, []).append(i)
    for req_id, idxs in groups.items():
        k, min_level, _ = inst.by_req[req_id]
        if len(idxs) > k:
            # drop greatest class surplus first, ties by greatest node_id
            idxs.sort(key=lambda i: (inst.levels[i] - min_level, inst.ids[i]), reverse=True)
            for i in idxs[: len(idxs) - k]:
                out[i] = 0
    return tuple(out)


def _plan_from_genes(inst: _Instance, genes: Sequence[int], fit: int, generations_run: int) -> AllocationPlan:
    groups: dict[int, set] = {}
    for i, g in enumerate(genes):
        if g:
            groups.setdefault(g, set()).add(inst.ids[i])
    assignments = {}
    satisfied = set()
    for req_id, nodes in groups.items():
        k, min_level, _ = inst.by_req[req_id]
        if len(nodes) == k:
            satisfied.add(req_id)
            assignments[req_id] = frozenset(nodes)
    return AllocationPlan(
        assignments=assignments,
        fitness=fit,
        satisfied=frozenset(satisfied),
        generations_run=generations_run,
    )


def _greedy_genes(inst: _Instance, order: Sequence[int]) -> tuple:
    """Fill requests in the given order with their least-surplus eligible
    free nodes, preferring powered-on nodes; skip unfillable requests."""
    genes = [0] * len(inst.pool)
    free = set(range(len(inst.pool)))
    for req_id in order:
        k, min_level, _ = inst.by_req[req_id]
        eligible = sorted(
            (i for i in free if inst.levels[i] >= min_level),
            key=lambda i: (inst.levels[i] - min_level, inst.off[i], inst.ids[i]),
        )
        if len(eligible) < k:
            continue
        for i in eligible[:k]:
            genes[i] = req_id
            free.discard(i)
    return tuple(genes)


def _seed_individuals(inst: _Instance) -> list[tuple]:
    """Heuristic seeds: the empty assignment plus greedy fills over several
    request orderings; the GA refines from there."""
    seeds = [tuple([0] * len(inst.pool))]
    req_ids = sorted(inst.requests)
    if len(req_ids) <= 4:
        orders = list(itertools.permutations(req_ids))
    else:
        by_priority = sorted(req_ids, key=lambda r: (-inst.by_req[r][2], r))
        by_size = sorted(req_ids, key=lambda r: (inst.by_req[r][0], r))
        orders = [tuple(req_ids), tuple(by_priority), tuple(by_size)]
    for order in orders:
        genes = _greedy_genes(inst, order)
        if genes not in seeds:
            seeds.append(genes)
    return seeds


def evolve(
    pool: Sequence[PoolNode],
    requests: Sequence[LeaseRequest],
    ga: GaParams,
    weights: FitnessWeights,
    seed: Optional[int] = None,
) -> AllocationPlan:
    """Tournament GA with uniform crossover, per-gene mutation, elitism
    and repair, initialized from greedy seeds plus random chromosomes;
    deterministic for a given (inputs, seed)."""
    inst = _Instance(pool, requests)
    if not requests or not pool:
        return AllocationPlan(assignments={}, fitness=0, satisfied=frozenset(), generations_run=0)

    rng = random.Random(ga.seed if seed is None else seed)
    n = len(inst.pool)
    choices = inst.gene_choices

    def random_genes():
        return _repair(inst, [rng.choice(choices) for _ in range(n)])

    population = _seed_individuals(inst)[: ga.population]
    population += [random_genes() for _ in range(ga.population - len(population))]
    scores = [_fitness(inst, g, weights) for g in population]

    best_genes, best_fit = max(zip(population, scores), key=lambda p: (p[1], p[0]))
    stall = 0
    generations_run = 0

    def tournament():
        best_i = rng.randrange(ga.population)
        for _ in range(ga.tournament_size - 1):
            i = rng.randrange(ga.population)
            if scores[i] > scores[best_i]:
                best_i = i
        return population[best_i]

    for _ in range(ga.generations):
        generations_run += 1
        elite = sorted(range(ga.population), key=lambda i: (-scores[i], population[i]))[: ga.elitism]
        new_pop = [population[i] for i in elite]
        while len(new_pop) < ga.population:
            p1, p2 = tournament(), tournament()
            if rng.random() < ga.crossover_rate:
                child = [
                    (a if rng.random() >= ga.gene_swap_prob else b) for a, b in zip(p1, p2)
                ]
            else:
                child = list(p1)
            for i in range(n):
                if rng.random() < ga.mutation_rate_per_gene:
                    child[i] = rng.choice(choices)
            new_pop.append(_repair(inst, child))
        population = new_pop
        scores = [_fitness(inst, g, weights) for g in population]
        gen_best, gen_fit = max(zip(population, scores), key=lambda p: (p[1], p[0]))
        if gen_fit > best_fit:
            best_fit, best_genes = gen_fit, gen_best
            stall = 0
        else:
            stall += 1
            if stall >= ga.stall_limit:
                break

    return _plan_from_genes(inst, best_genes, best_fit, generations_run)


def oracle_optimal(
    pool: Sequence[PoolNode],
    requests: Sequence[LeaseRequest],
    weights: FitnessWeights,
) -> AllocationPlan:
    """Exhaustive enumeration of every gene vector, repair applied; ties
    broken by lexicographically smallest vector (enumeration order)."""
    inst = _Instance(pool, requests)
    n = len(inst.pool)
    n_vectors = (len(requests) + 1) ** n
    if n_vectors > ORACLE_MAX_VECTORS:
        raise errors.InstanceTooLarge(
            f"{len(requests) + 1}^{n} = {n_vectors} exceeds {ORACLE_MAX_VECTORS}"
        )
    best_genes: Optional[tuple] = None
    best_fit = None
    for vec in itertools.product(inst.gene_choices, repeat=n):
        repaired = _repair(inst, vec)
        fit = _fitness(inst, repaired, weights)
        if best_fit is None or fit > best_fit:
            best_fit, best_genes = fit, repaired
    if best_genes is None:  # empty pool
        return AllocationPlan(assignments={}, fitness=0, satisfied=frozenset(), generations_run=0)
    return _plan_from_genes(inst, best_genes, best_fit, 0)
