"""Brute-force optimal schedule cost C* for desk-scale instances.

Single object: enumerate the set M of nodes the object visits (v' always in it), price
the shortest open walk from v' over M with Held-Karp, and send every transaction to its
nearest node of M.

Several objects: enumerate the execution node of every transaction. Each execution node
is one meeting, and the objects visit the meetings they are needed at in one common
order that starts at v'. That common order is what every scheduler here produces.
"""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from app.errors import TooLarge, ValidationError
from app.metric_graph import DistanceOracle, NodeId
from app.sched_core import Scenario, Schedule, common_home, tour_schedule

logger = logging.getLogger(__name__)

SINGLE_MAX_NODES = 10
MULTI_MAX_NODES = 8
MULTI_MAX_TRANSACTIONS = 5


@dataclass(frozen=True)
class OracleResult:
    c_star: float
    # execution node per transaction
    assignment: dict[int, NodeId]
    # stop order shared by all objects, starting at v'
    walk: tuple[NodeId, ...]


def witness_schedule(sc: Scenario, result: OracleResult) -> Schedule:
    return tour_schedule(sc, result.assignment, result.walk)


def _held_karp_table(
    d: DistanceOracle, anchor: NodeId, others: list[NodeId]
) -> tuple[list[list[float]], list[list[int]]]:
    """cost[mask][j]: shortest open walk from anchor over exactly `mask`, ending at others[j]."""
    m = len(others)
    full = 1 << m
    cost = [[math.inf] * m for _ in range(full)]
    back = [[-1] * m for _ in range(full)]
    for j, v in enumerate(others):
        cost[1 << j][j] = d(anchor, v)
    for mask in range(1, full):
        row = cost[mask]
        for j in range(m):
            here = row[j]
            if here == math.inf:
                continue
            for nxt in range(m):
                bit = 1 << nxt
                if mask & bit:
                    continue
                candidate = here + d(others[j], others[nxt])
                if candidate < cost[mask | bit][nxt]:
                    cost[mask | bit][nxt] = candidate
                    back[mask | bit][nxt] = j
    return cost, back


def _walk_for(
    others: list[NodeId], cost: list[list[float]], back: list[list[int]], mask: int
) -> tuple[float, list[NodeId]]:
    if mask == 0:
        return 0.0, []
    last = min((j for j in range(len(others)) if mask & (1 << j)), key=lambda j: (cost[mask][j], j))
    length = cost[mask][last]
    path: list[NodeId] = []
    while last != -1:
        path.append(others[last])
        prev = back[mask][last]
        mask ^= 1 << last
        last = prev
    return length, path[::-1]


def optimal_cost_single(sc: Scenario) -> OracleResult:
    if sc.n > SINGLE_MAX_NODES:
        raise TooLarge(f"Single-object oracle supports n <= {SINGLE_MAX_NODES}, got n={sc.n}")
    if not sc.is_single_object:
        raise ValidationError(f"Single-object oracle needs exactly one object, got {len(sc.objects)}")

    d = sc.dist
    alpha, beta = sc.cost.alpha, sc.cost.beta
    v_prime = common_home(sc)
    others = [v for v in range(sc.n) if v != v_prime]
    cost, back = _held_karp_table(d, v_prime, others)
    homes = np.asarray([t.home for t in sc.transactions], dtype=np.int64)

    best_total = math.inf
    best_mask = 0
    for mask in range(1 << len(others)):
        walk = 0.0 if mask == 0 else min(cost[mask][j] for j in range(len(others)) if mask & (1 << j))
        members = [v_prime] + [others[j] for j in range(len(others)) if mask & (1 << j)]
        reach = float(d.dist[np.ix_(homes, members)].min(axis=1).sum()) if len(homes) else 0.0
        total = alpha * walk + beta * reach
        if total < best_total:
            best_total, best_mask = total, mask

    _, path = _walk_for(others, cost, back, best_mask)
    walk_order = (v_prime, *path)
    position = {v: i for i, v in enumerate(walk_order)}
    assignment = {
        t.id: min(walk_order, key=lambda u: (d(t.home, u), position[u])) for t in sc.transactions
    }
    logger.debug(f"Single-object oracle for {sc.scenario_id}: C*={best_total:g} walk={list(walk_order)}")
    return OracleResult(c_star=float(best_total), assignment=assignment, walk=walk_order)


def _common_order_length(
    d: DistanceOracle, v_prime: NodeId, required: tuple[frozenset[NodeId], ...]
) -> tuple[float, tuple[NodeId, ...]]:
    """Cheapest common stop order: summed per-object walk length and the order itself."""
    stops = sorted(frozenset().union(*required) - {v_prime})
    best_length = math.inf
    best_order: tuple[NodeId, ...] = ()
    for order in itertools.permutations(stops):
        length = 0.0
        for needed in required:
            here = v_prime
            for stop in order:
                if stop in needed:
                    length += d(here, stop)
                    here = stop
            if length >= best_length:
                break
        if length < best_length:
            best_length, best_order = length, order
    return best_length, (v_prime, *best_order)


def optimal_cost_multi(sc: Scenario) -> OracleResult:
    if sc.n > MULTI_MAX_NODES:
        raise TooLarge(f"Multi-object oracle supports n <= {MULTI_MAX_NODES}, got n={sc.n}")
    if len(sc.transactions) > MULTI_MAX_TRANSACTIONS:
        raise TooLarge(
            f"Multi-object oracle supports at most {MULTI_MAX_TRANSACTIONS} transactions, got {len(sc.transactions)}"
        )

    d = sc.dist
    alpha, beta = sc.cost.alpha, sc.cost.beta
    v_prime = common_home(sc)
    txns = sorted(sc.transactions, key=lambda t: t.id)
    object_ids = sorted(o.id for o in sc.objects)
    candidates = [sorted(range(sc.n), key=lambda u, home=t.home: (d(home, u), u)) for t in txns]

    best_total = beta * sum(d(t.home, v_prime) for t in txns)
    best_assignment = tuple(v_prime for _ in txns)
    best_walk: tuple[NodeId, ...] = (v_prime,)
    memo: dict[tuple[frozenset[NodeId], ...], tuple[float, tuple[NodeId, ...]]] = {}
    chosen: list[NodeId] = [v_prime] * len(txns)

    def search(i: int, partial: float) -> None:
        nonlocal best_total, best_assignment, best_walk
        if i == len(txns):
            required = tuple(
                frozenset(chosen[j] for j, t in enumerate(txns) if obj in t.objs) - {v_prime} for obj in object_ids
            )
            if required not in memo:
                memo[required] = _common_order_length(d, v_prime, required)
            length, walk = memo[required]
            total = partial + alpha * length
            if total < best_total:
                best_total, best_assignment, best_walk = total, tuple(chosen), walk
            return
        for u in candidates[i]:
            step = partial + beta * d(txns[i].home, u)
            if step >= best_total:
                break
            chosen[i] = u
            search(i + 1, step)
        chosen[i] = v_prime

    search(0, 0.0)
    assignment = {t.id: node for t, node in zip(txns, best_assignment)}
    logger.debug(f"Multi-object oracle for {sc.scenario_id}: C*={best_total:g} patterns={len(memo)}")
    return OracleResult(c_star=float(best_total), assignment=assignment, walk=best_walk)
