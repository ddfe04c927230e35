"""Global-aware scheduling of one shared object: super-leader election, level pruning, tour.

The election sweeps levels 0..h+1. In every cluster the not-yet-assigned transactions
are counted, and the leader becomes a super-leader once the count reaches 2*gamma.
Levels whose total tally stays below prune_factor * I * alpha are dropped, and their
transactions go straight to the object's home v'. The object then follows one tour
over the surviving super-leaders.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

from app.errors import ValidationError
from app.hierarchy import PartitionHierarchy
from app.metric_graph import NodeId
from app.models import TourKind, TransactionSpec
from app.sched_core import CostBreakdown, Scenario, Schedule, common_home, schedule_cost, tour_schedule
from app.tours import EXACT_TOUR_LIMIT, TourOrder, UniversalOrder, exact_tour, make_tour, tour_length, universal_order

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class SuperLeader:
    node: NodeId
    level: int

    def __str__(self) -> str:
        return f"{self.node}@L{self.level}"


@dataclass(frozen=True)
class ElectionStep:
    """One cluster inspected by the sweep that held at least one unassigned transaction."""

    level: int
    leader: NodeId
    unassigned: int
    elected: bool


@dataclass(frozen=True)
class SuperLeaderAssignment:
    gamma: int
    super_leaders: tuple[SuperLeader, ...]
    # None means the transaction goes directly to v'
    dedicated: dict[int, Optional[SuperLeader]]
    per_leader: dict[SuperLeader, tuple[int, ...]]
    trace: tuple[ElectionStep, ...] = field(default=(), repr=False)

    @property
    def per_level(self) -> dict[int, int]:
        """Tally of transactions bound at each level."""
        tallies: dict[int, int] = {}
        for leader, txns in self.per_leader.items():
            tallies[leader.level] = tallies.get(leader.level, 0) + len(txns)
        return dict(sorted(tallies.items()))

    @property
    def leaders_by_level(self) -> dict[int, tuple[SuperLeader, ...]]:
        grouped: dict[int, list[SuperLeader]] = {}
        for leader in self.super_leaders:
            grouped.setdefault(leader.level, []).append(leader)
        return {level: tuple(sorted(group)) for level, group in sorted(grouped.items())}

    @property
    def direct_to_home(self) -> tuple[int, ...]:
        return tuple(sorted(t for t, s in self.dedicated.items() if s is None))


@dataclass(frozen=True)
class PruneReport:
    bar: float
    pruned_levels: tuple[int, ...]
    redirected: tuple[int, ...]
    s_f: tuple[SuperLeader, ...]
    dispositions: dict[int, Optional[SuperLeader]]

    @property
    def s_f_nodes(self) -> tuple[NodeId, ...]:
        return tuple(sorted({s.node for s in self.s_f}))


@dataclass(frozen=True)
class SingleScheduleResult:
    assignment: SuperLeaderAssignment
    prune: PruneReport
    tour: TourOrder
    schedule: Schedule
    cost: CostBreakdown
    tour_length: float
    tour_star: Optional[float]

    @property
    def destinations(self) -> dict[int, NodeId]:
        return {t: s.node if s is not None else self.tour.anchor for t, s in self.prune.dispositions.items()}

    @property
    def tour_ratio(self) -> Optional[float]:
        """Tour(S_f) / Tour*(S_f); 1 when the tour never leaves v'."""
        if self.tour_star is None:
            return None
        if self.tour_star == 0:
            return 1.0
        return self.tour_length / self.tour_star


def elect_super_leaders(
    sc: Scenario, h: PartitionHierarchy, transactions: Optional[Iterable[TransactionSpec]] = None
) -> SuperLeaderAssignment:
    """Sweep levels bottom-up and bind transactions to the first cluster that collects 2*gamma of them."""
    gamma = sc.cost.gamma
    pending = sorted(transactions if transactions is not None else sc.transactions, key=lambda t: t.id)
    dedicated: dict[int, Optional[SuperLeader]] = {t.id: None for t in pending}
    per_leader: dict[SuperLeader, tuple[int, ...]] = {}
    super_leaders: list[SuperLeader] = []
    trace: list[ElectionStep] = []

    for lvl in h.sweep_levels():
        for cluster in sorted(lvl.clusters, key=lambda c: c.leader):
            inside = [t for t in pending if t.home in cluster.members]
            if not inside:
                continue
            elected = len(inside) >= 2 * gamma
            trace.append(ElectionStep(level=lvl.level, leader=cluster.leader, unassigned=len(inside), elected=elected))
            if not elected:
                continue
            leader = SuperLeader(node=cluster.leader, level=lvl.level)
            super_leaders.append(leader)
            per_leader[leader] = tuple(t.id for t in inside)
            for t in inside:
                dedicated[t.id] = leader
            taken = {t.id for t in inside}
            pending = [t for t in pending if t.id not in taken]
            logger.debug(f"Super-leader {leader} elected with {len(inside)} transactions (gamma={gamma})")

    return SuperLeaderAssignment(
        gamma=gamma,
        super_leaders=tuple(super_leaders),
        dedicated=dedicated,
        per_leader=per_leader,
        trace=tuple(trace),
    )


def prune_levels(
    sc: Scenario, assignment: SuperLeaderAssignment, I: int, prune_factor: float = 8.0
) -> PruneReport:
    """Drop every level whose tally is below prune_factor * I * alpha; survivors form S_f."""
    bar = prune_factor * I * sc.cost.alpha
    pruned = tuple(level for level, tally in assignment.per_level.items() if tally < bar)
    dispositions = {
        t: (None if s is not None and s.level in pruned else s) for t, s in assignment.dedicated.items()
    }
    redirected = tuple(
        sorted(t for t, s in assignment.dedicated.items() if s is not None and s.level in pruned)
    )
    s_f = tuple(s for s in assignment.super_leaders if s.level not in pruned)
    if pruned:
        logger.debug(f"Pruned levels {list(pruned)} below bar {bar:g}; {len(redirected)} transactions redirected")
    return PruneReport(bar=bar, pruned_levels=pruned, redirected=redirected, s_f=s_f, dispositions=dispositions)


def optimal_tour_length(sc: Scenario, stops: Iterable[NodeId], anchor: NodeId) -> Optional[float]:
    """Tour*(stops) when small enough for the exact solver."""
    nodes = set(stops) | {anchor}
    if len(nodes) > EXACT_TOUR_LIMIT:
        return None
    return exact_tour(sc.dist, nodes, anchor)[1]


def schedule_single(
    sc: Scenario,
    h: PartitionHierarchy,
    tour_kind: TourKind = TourKind.MST,
    universal: Optional[UniversalOrder] = None,
) -> SingleScheduleResult:
    if not sc.is_single_object:
        raise ValidationError(f"Single-object scheduling needs exactly one object, got {len(sc.objects)}")
    v_prime = common_home(sc)

    assignment = elect_super_leaders(sc, h)
    prune = prune_levels(sc, assignment, h.params.I, sc.config.prune_factor)
    if tour_kind == TourKind.UNIVERSAL and universal is None:
        universal = universal_order(h)
    tour = make_tour(tour_kind, sc.dist, prune.s_f_nodes, v_prime, universal)

    destinations = {t: s.node if s is not None else v_prime for t, s in prune.dispositions.items()}
    schedule = tour_schedule(sc, destinations, tour.visits)
    cost = schedule_cost(sc, schedule)
    result = SingleScheduleResult(
        assignment=assignment,
        prune=prune,
        tour=tour,
        schedule=schedule,
        cost=cost,
        tour_length=tour_length(sc.dist, tour),
        tour_star=optimal_tour_length(sc, prune.s_f_nodes, v_prime),
    )
    logger.debug(
        f"Scheduled {sc.scenario_id}: |S|={len(assignment.super_leaders)} |S_f|={len(prune.s_f)} "
        f"cost={cost.total:g}"
    )
    return result
