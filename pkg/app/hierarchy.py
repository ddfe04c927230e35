"""Hierarchy H of (r_l, sigma, I)-partitions with leaders and parent links.

Each level l >= 0 is built from a greedy r_l-net scanned in ascending node id; every
node joins its nearest net point (lowest id on ties) and the net point leads the
cluster. That gives cluster diameter <= 2 r_l, so any sigma >= 2 holds.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from app.errors import InvariantViolation, NoParent
from app.metric_graph import DistanceOracle, NodeId, doubling_dimension_estimate, greedy_net

logger = logging.getLogger(__name__)

TRIVIAL_LEVEL = -1


@dataclass(frozen=True)
class PartitionParams:
    sigma: float
    rho: float
    h: int
    I: int
    delta: int
    zeta: float


@dataclass(frozen=True)
class Cluster:
    level: int
    leader: NodeId
    members: frozenset[NodeId]

    @property
    def id(self) -> str:
        return f"L{self.level}/{self.leader}"


@dataclass(frozen=True)
class PartitionLevel:
    level: int
    radius: float
    clusters: tuple[Cluster, ...]
    owner: tuple[int, ...] = field(repr=False)  # node -> index into clusters

    def cluster_of(self, v: NodeId) -> Cluster:
        return self.clusters[self.owner[v]]


@dataclass(frozen=True)
class PartitionReport:
    level: int
    radius: float
    clusters: int
    max_diameter: float
    measured_I: int
    exact_cover: bool


@dataclass(frozen=True)
class PartitionHierarchy:
    params: PartitionParams
    levels: dict[int, PartitionLevel]
    parent_of: dict[Cluster, Cluster] = field(repr=False)
    metric: DistanceOracle = field(repr=False, compare=False)

    @property
    def top(self) -> PartitionLevel:
        return self.levels[self.params.h]

    def level(self, l: int) -> PartitionLevel:
        return self.levels[l]

    def sweep_levels(self) -> Iterator[PartitionLevel]:
        """Levels 0..h+1 in the order the election sweep visits them."""
        for l in range(0, self.params.h + 2):
            yield self.levels[l]

    def children(self, c: Cluster) -> list[Cluster]:
        if c.level <= TRIVIAL_LEVEL:
            return []
        below = self.levels[c.level - 1]
        return [child for child in below.clusters if self.parent_of.get(child) == c]


def top_level(diameter: float, rho: float) -> int:
    """h = ceil(log_rho D), computed on integers powers to avoid float log error."""
    h = 0
    while rho**h < diameter:
        h += 1
    return h


def level_radius(d: DistanceOracle, l: int, rho: float) -> float:
    if l == TRIVIAL_LEVEL:
        return 0.0
    return float(min(d.diameter, rho**l))


def _build_level(d: DistanceOracle, l: int, radius: float) -> PartitionLevel:
    if l == TRIVIAL_LEVEL:
        clusters = tuple(Cluster(level=l, leader=v, members=frozenset([v])) for v in range(d.n))
        return PartitionLevel(level=l, radius=0.0, clusters=clusters, owner=tuple(range(d.n)))

    net = greedy_net(d, list(range(d.n)), radius)
    # argmin returns the first minimum, i.e. the lowest-id net point on ties
    nearest = np.argmin(d.dist[np.asarray(net)], axis=0)
    members: list[list[NodeId]] = [[] for _ in net]
    for v, idx in enumerate(nearest):
        members[int(idx)].append(v)
    clusters = tuple(Cluster(level=l, leader=leader, members=frozenset(m)) for leader, m in zip(net, members))
    return PartitionLevel(level=l, radius=radius, clusters=clusters, owner=tuple(int(i) for i in nearest))


def verify_partition(d: DistanceOracle, lvl: PartitionLevel) -> PartitionReport:
    """Measure a level: largest intra-cluster distance and the intersection count I."""
    max_diameter = 0.0
    for c in lvl.clusters:
        idx = np.fromiter(sorted(c.members), dtype=np.int64)
        max_diameter = max(max_diameter, float(d.dist[np.ix_(idx, idx)].max()))

    labels = np.asarray(lvl.owner)
    within = d.dist <= lvl.radius
    measured_I = max(len(np.unique(labels[within[v]])) for v in range(d.n))

    covered = sorted(v for c in lvl.clusters for v in c.members)
    exact_cover = covered == list(range(d.n))
    return PartitionReport(
        level=lvl.level,
        radius=lvl.radius,
        clusters=len(lvl.clusters),
        max_diameter=max_diameter,
        measured_I=int(measured_I),
        exact_cover=exact_cover,
    )


def build_hierarchy(d: DistanceOracle, sigma: float = 2.0) -> PartitionHierarchy:
    """Build levels -1..h+1; level h+1 repeats level h so a 0..h+1 sweep is well defined."""
    if sigma < 2:
        raise ValueError(f"sigma must be >= 2, got {sigma}")
    rho = 4 * sigma
    h = top_level(d.diameter, rho)

    levels: dict[int, PartitionLevel] = {}
    measured_I = 1
    for l in range(TRIVIAL_LEVEL, h + 2):
        lvl = _build_level(d, l, level_radius(d, l, rho))
        report = verify_partition(d, lvl)
        if l >= 0 and report.max_diameter > sigma * lvl.radius:
            raise InvariantViolation(
                f"Level {l} cluster diameter {report.max_diameter} exceeds sigma*r = {sigma * lvl.radius}"
            )
        if not report.exact_cover:
            raise InvariantViolation(f"Level {l} clusters do not partition V")
        measured_I = max(measured_I, report.measured_I)
        levels[l] = lvl
        logger.debug(f"Level {l}: radius={lvl.radius} clusters={len(lvl.clusters)} I={report.measured_I}")

    if len(levels[h].clusters) != 1:
        raise InvariantViolation(f"Top level {h} has {len(levels[h].clusters)} clusters, expected 1")

    parent_of: dict[Cluster, Cluster] = {}
    for l in range(TRIVIAL_LEVEL, h):
        upper = levels[l + 1]
        for c in levels[l].clusters:
            parent_of[c] = upper.cluster_of(c.leader)

    delta = doubling_dimension_estimate(d)
    zeta = 2 ** (delta * math.log2(8 * sigma))
    params = PartitionParams(sigma=sigma, rho=rho, h=h, I=measured_I, delta=delta, zeta=zeta)
    logger.info(f"Built hierarchy: n={d.n} D={d.diameter} h={h} I={measured_I} delta={delta}")
    return PartitionHierarchy(params=params, levels=levels, parent_of=parent_of, metric=d)


def parent_leader(h: PartitionHierarchy, c: Cluster) -> Cluster:
    """The level-(l+1) cluster containing c's leader."""
    if c.level >= h.params.h:
        raise NoParent(f"Cluster {c.id} is at the top level {h.params.h}")
    return h.parent_of[c]


def dump_hierarchy(h: PartitionHierarchy) -> list[str]:
    """One line per cluster: level, radius, leader, members."""
    lines = []
    for l in sorted(h.levels):
        lvl = h.levels[l]
        for c in lvl.clusters:
            members = " ".join(str(v) for v in sorted(c.members))
            lines.append(f"{l}\t{lvl.radius:g}\t{c.leader}\t{members}")
    return lines
