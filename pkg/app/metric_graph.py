"""Weighted graphs, their shortest-path metric and deterministic graph generators."""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import networkx as nx
import numpy as np

from app.errors import DisconnectedGraph, DuplicateEdge, GenerationFailed, GraphError, InvalidEdge, InvalidWeight
from app.models import GeneratorKind, GeneratorSpec

logger = logging.getLogger(__name__)

NodeId = int
Weight = Union[int, float]
Edge = tuple[NodeId, NodeId, Weight]

# estimates above this are not "constant" for any practical purpose
DOUBLING_WARN_THRESHOLD = 6
UNIT_DISK_MAX_RETRIES = 50


def _normalize_weight(w: Weight) -> Weight:
    w = float(w)
    return int(w) if w.is_integer() else w


@dataclass(frozen=True)
class WeightedGraph:
    """Connected undirected graph G=(V,E,w) with nodes 0..n-1 and weights >= 1."""

    n: int
    edges: tuple[Edge, ...]
    adjacency: tuple[tuple[tuple[NodeId, Weight], ...], ...] = field(compare=False, repr=False)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_weighted_edges_from(self.edges)
        return graph

    def to_dict(self) -> dict:
        return {"n": self.n, "edges": [[u, v, w] for u, v, w in self.edges]}


@dataclass(frozen=True, eq=False)
class DistanceOracle:
    """Exact all-pairs shortest-path table with the graph diameter D."""

    dist: np.ndarray
    diameter: float

    @property
    def n(self) -> int:
        return int(self.dist.shape[0])

    def __call__(self, u: NodeId, v: NodeId) -> float:
        return float(self.dist[u, v])

    @cached_property
    def log2_diameter(self) -> float:
        """log2 of D, floored at 1 so bound formulas never degenerate on tiny graphs."""
        return math.log2(max(self.diameter, 2.0))


def build_graph(n: int, edges: Iterable[Sequence[Weight]]) -> WeightedGraph:
    """Validate an edge list and build a connected weighted graph."""
    if n < 1:
        raise GraphError(f"Graph needs at least one node, got n={n}")

    seen: set[tuple[int, int]] = set()
    normalized: list[Edge] = []
    for edge in edges:
        if len(edge) != 3:
            raise InvalidEdge(f"Edge {list(edge)} must have exactly three entries [u, v, w]")
        u, v, w = int(edge[0]), int(edge[1]), edge[2]
        if not (0 <= u < n and 0 <= v < n):
            raise InvalidEdge(f"Edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
        if u == v:
            raise InvalidEdge(f"Self-loop at node {u} is not allowed")
        if w < 1:
            raise InvalidWeight(f"Edge ({u}, {v}) has weight {w}; minimum edge weight is 1")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"Edge ({key[0]}, {key[1]}) appears more than once")
        seen.add(key)
        normalized.append((key[0], key[1], _normalize_weight(w)))

    normalized.sort()
    adjacency: list[list[tuple[NodeId, Weight]]] = [[] for _ in range(n)]
    for u, v, w in normalized:
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))

    graph = WeightedGraph(n=n, edges=tuple(normalized), adjacency=tuple(tuple(a) for a in adjacency))
    if not nx.is_connected(graph.to_networkx()):
        components = nx.number_connected_components(graph.to_networkx())
        raise DisconnectedGraph(f"Graph with {n} nodes has {components} connected components")
    return graph


def all_pairs_distances(g: WeightedGraph) -> DistanceOracle:
    """Shortest-path metric via Dijkstra from every node."""
    dist = np.zeros((g.n, g.n), dtype=np.float64)
    for source, lengths in nx.all_pairs_dijkstra_path_length(g.to_networkx(), weight="weight"):
        for target, length in lengths.items():
            dist[source, target] = length
    dist.setflags(write=False)
    return DistanceOracle(dist=dist, diameter=float(dist.max()))


def neighborhood(d: DistanceOracle, v: NodeId, r: float) -> frozenset[NodeId]:
    """N_r(v): every node within distance r of v, v included."""
    return frozenset(int(u) for u in np.flatnonzero(d.dist[v] <= r))


def grid_graph(width: int, height: int) -> WeightedGraph:
    if width < 1 or height < 1:
        raise GraphError(f"Grid dimensions must be >= 1, got {width}x{height}")
    edges: list[Edge] = []
    for y in range(height):
        for x in range(width):
            node = y * width + x
            if x + 1 < width:
                edges.append((node, node + 1, 1))
            if y + 1 < height:
                edges.append((node, node + width, 1))
    return build_graph(width * height, edges)


def unit_disk_graph(n: int, radius: float, side: float, seed: int) -> WeightedGraph:
    """Random unit-disk graph in a side x side square, weights scaled so the shortest edge is 1.

    Placements are redrawn from the same seeded stream until the graph is connected.
    """
    if n < 1:
        raise GraphError(f"Unit-disk graph needs n >= 1, got {n}")
    if radius <= 0:
        raise GraphError(f"Unit-disk radius must be positive, got {radius}")

    rng = np.random.default_rng(seed)
    for attempt in range(UNIT_DISK_MAX_RETRIES):
        points = rng.uniform(0.0, side, size=(n, 2))
        if n == 1:
            return build_graph(1, [])

        euclid = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        us, vs = np.nonzero(np.triu(euclid <= radius, k=1))
        if len(us) == 0:
            continue
        lengths = euclid[us, vs]
        shortest = float(lengths.min())
        edges = [
            (int(u), int(v), max(1, int(np.rint(length / shortest))))
            for u, v, length in zip(us, vs, lengths)
        ]
        candidate = nx.Graph()
        candidate.add_nodes_from(range(n))
        candidate.add_edges_from((u, v) for u, v, _ in edges)
        if nx.is_connected(candidate):
            if attempt > 0:
                logger.debug(f"Unit-disk graph n={n} r={radius} connected after {attempt + 1} placements")
            return build_graph(n, edges)

    logger.warning(f"Unit-disk graph n={n} r={radius} side={side} seed={seed} never connected")
    raise GenerationFailed(
        f"No connected unit-disk placement for n={n}, radius={radius} after {UNIT_DISK_MAX_RETRIES} attempts"
    )


def generate(spec: GeneratorSpec) -> WeightedGraph:
    """Deterministic graph for a generator spec."""
    match spec.kind:
        case GeneratorKind.GRID:
            return grid_graph(spec.width, spec.height)
        case GeneratorKind.UNIT_DISK:
            return unit_disk_graph(spec.n, spec.radius, spec.side, spec.seed)
    raise GraphError(f"Unknown generator kind {spec.kind}")


def radius_grid(diameter: float) -> list[float]:
    """Radii 1, 2, 4, ... below D, then D itself."""
    if diameter <= 0:
        return []
    radii: list[float] = []
    r = 1.0
    while r < diameter:
        radii.append(r)
        r *= 2
    radii.append(float(diameter))
    return radii


def greedy_net(d: DistanceOracle, nodes: Sequence[NodeId], separation: float) -> list[NodeId]:
    """Scan nodes in the given order; keep a node if it is farther than `separation` from every kept one."""
    net: list[NodeId] = []
    candidates = np.asarray(nodes, dtype=np.int64)
    covered = np.zeros(len(candidates), dtype=bool)
    for i, node in enumerate(candidates):
        if covered[i]:
            continue
        net.append(int(node))
        covered |= d.dist[node, candidates] <= separation
    return net


def doubling_dimension_estimate(d: DistanceOracle) -> int:
    """Greedy-net upper estimate of the doubling dimension delta.

    For each node v and radius r on the grid {1, 2, 4, ..., D}, N_r(v) is covered by the
    r/2-balls around a greedy r/2-net; delta is the smallest integer with 2^delta >= the
    largest net seen.
    """
    largest = 1
    for r in radius_grid(d.diameter):
        for v in range(d.n):
            ball = np.flatnonzero(d.dist[v] <= r)
            largest = max(largest, len(greedy_net(d, ball.tolist(), r / 2)))
    delta = math.ceil(math.log2(largest)) if largest > 1 else 0
    if delta > DOUBLING_WARN_THRESHOLD:
        logger.warning(f"Doubling dimension estimate {delta} is large; partition constants will be loose")
    return delta
