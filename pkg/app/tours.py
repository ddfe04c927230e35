"""Visiting orders for an object starting at its home: MST pre-order, universal order, exact.

All tours are open walks anchored at the start node; the object never returns home.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import networkx as nx

from app.errors import TooLarge
from app.hierarchy import TRIVIAL_LEVEL, Cluster, PartitionHierarchy
from app.metric_graph import DistanceOracle, NodeId
from app.models import TourKind

logger = logging.getLogger(__name__)

EXACT_TOUR_LIMIT = 12


@dataclass(frozen=True)
class TourOrder:
    anchor: NodeId
    visits: tuple[NodeId, ...]
    kind: TourKind


@dataclass(frozen=True)
class UniversalOrder:
    order: tuple[NodeId, ...]


def mst_tour(d: DistanceOracle, s: Iterable[NodeId], anchor: NodeId) -> TourOrder:
    """Pre-order walk of the metric-closure MST over s + anchor, rooted at anchor."""
    nodes = sorted(set(s) | {anchor})
    if len(nodes) == 1:
        return TourOrder(anchor=anchor, visits=(anchor,), kind=TourKind.MST)

    closure = nx.Graph()
    closure.add_nodes_from(nodes)
    for i, u in enumerate(nodes):
        for v in nodes[i + 1 :]:
            closure.add_edge(u, v, weight=d(u, v))
    tree = nx.minimum_spanning_tree(closure, weight="weight", algorithm="kruskal")

    visits: list[NodeId] = []
    seen: set[NodeId] = set()
    stack = [anchor]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        visits.append(u)
        # children in ascending connecting-edge weight, then id; pushed reversed so the first pops first
        children = sorted((tree[u][v]["weight"], v) for v in tree.neighbors(u) if v not in seen)
        stack.extend(v for _, v in reversed(children))
    return TourOrder(anchor=anchor, visits=tuple(visits), kind=TourKind.MST)


def universal_order(h: PartitionHierarchy) -> UniversalOrder:
    """Global permutation of V from a pre-order over the parent-link tree of H.

    Children of a cluster are visited nearest-leader-first starting from the parent's
    leader (ties by leader id); level -1 singletons emit their node.
    """
    d = h.metric
    children: dict[Cluster, list[Cluster]] = {}
    for child, parent in h.parent_of.items():
        children.setdefault(parent, []).append(child)

    order: list[NodeId] = []

    def visit(c: Cluster) -> None:
        if c.level == TRIVIAL_LEVEL:
            order.append(c.leader)
            return
        kids = children.get(c, [])
        current = c.leader
        remaining = sorted(kids, key=lambda k: k.leader)
        while remaining:
            nxt = min(remaining, key=lambda k: (d(current, k.leader), k.leader))
            remaining.remove(nxt)
            visit(nxt)
            current = nxt.leader

    for root in h.top.clusters:
        visit(root)
    return UniversalOrder(order=tuple(order))


def induced_tour(u: UniversalOrder, s: Iterable[NodeId], anchor: NodeId) -> TourOrder:
    """Members of s + anchor in universal order, rotated so the anchor comes first."""
    wanted = set(s) | {anchor}
    sequence = [v for v in u.order if v in wanted]
    start = sequence.index(anchor)
    return TourOrder(anchor=anchor, visits=tuple(sequence[start:] + sequence[:start]), kind=TourKind.UNIVERSAL)


def exact_tour(d: DistanceOracle, s: Iterable[NodeId], anchor: NodeId) -> tuple[TourOrder, float]:
    """Shortest open walk from anchor covering s (Held-Karp over subsets)."""
    others = sorted(set(s) - {anchor})
    if len(others) + 1 > EXACT_TOUR_LIMIT:
        raise TooLarge(f"Exact tour supports at most {EXACT_TOUR_LIMIT} nodes, got {len(others) + 1}")
    k = len(others)
    if k == 0:
        return TourOrder(anchor=anchor, visits=(anchor,), kind=TourKind.EXACT), 0.0

    inf = math.inf
    full = (1 << k) - 1
    cost = [[inf] * k for _ in range(full + 1)]
    back = [[-1] * k for _ in range(full + 1)]
    for j, v in enumerate(others):
        cost[1 << j][j] = d(anchor, v)

    for mask in range(1, full + 1):
        row = cost[mask]
        for j in range(k):
            here = row[j]
            if here == inf:
                continue
            for nxt in range(k):
                bit = 1 << nxt
                if mask & bit:
                    continue
                candidate = here + d(others[j], others[nxt])
                if candidate < cost[mask | bit][nxt]:
                    cost[mask | bit][nxt] = candidate
                    back[mask | bit][nxt] = j

    last = min(range(k), key=lambda j: (cost[full][j], j))
    length = cost[full][last]
    path: list[NodeId] = []
    mask = full
    while last != -1:
        path.append(others[last])
        prev = back[mask][last]
        mask ^= 1 << last
        last = prev
    visits = (anchor, *reversed(path))
    return TourOrder(anchor=anchor, visits=visits, kind=TourKind.EXACT), float(length)


def tour_length(d: DistanceOracle, t: TourOrder) -> float:
    return float(sum(d(a, b) for a, b in zip(t.visits, t.visits[1:])))


def make_tour(
    kind: TourKind,
    d: DistanceOracle,
    s: Iterable[NodeId],
    anchor: NodeId,
    universal: UniversalOrder | None = None,
) -> TourOrder:
    """Dispatch on the configured tour kind."""
    match kind:
        case TourKind.MST:
            return mst_tour(d, s, anchor)
        case TourKind.UNIVERSAL:
            if universal is None:
                raise ValueError("universal tour needs the hierarchy's universal order")
            return induced_tour(universal, s, anchor)
        case TourKind.EXACT:
            return exact_tour(d, s, anchor)[0]
    raise ValueError(f"Unknown tour kind {kind}")
