"""Global-aware scheduling of several objects sharing one home v'.

Each object runs its own election and pruning over the transactions that need it. Every
transaction then moves to the closest of its per-object super-leaders, and all objects
follow one shared tour, each skipping the stops where it is not needed.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from app.hierarchy import PartitionHierarchy
from app.metric_graph import DistanceOracle, NodeId
from app.models import TourKind
from app.sched_core import (
    CostBreakdown,
    Scenario,
    Schedule,
    common_home,
    object_paths,
    restrict_to_object,
    schedule_cost,
    tour_schedule,
)
from app.single_scheduler import (
    PruneReport,
    SuperLeader,
    SuperLeaderAssignment,
    elect_super_leaders,
    optimal_tour_length,
    prune_levels,
    schedule_single,
)
from app.tours import TourOrder, UniversalOrder, make_tour, tour_length, universal_order

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiAssignment:
    v_prime: NodeId
    per_object: dict[int, SuperLeaderAssignment]
    per_object_prune: dict[int, PruneReport]
    # None means the transaction goes directly to v'
    chosen: dict[int, Optional[SuperLeader]]

    @property
    def per_txn(self) -> dict[int, NodeId]:
        return {t: s.node if s is not None else self.v_prime for t, s in self.chosen.items()}

    @property
    def s_f_nodes(self) -> tuple[NodeId, ...]:
        return tuple(sorted({s.node for s in self.chosen.values() if s is not None}))


@dataclass(frozen=True)
class MultiScheduleResult:
    assignment: MultiAssignment
    tour: TourOrder
    schedule: Schedule
    cost: CostBreakdown
    tour_length: float
    tour_star: Optional[float]
    required_stops: dict[int, tuple[NodeId, ...]]
    object_travel: dict[int, float]

    @property
    def tour_ratio(self) -> Optional[float]:
        if self.tour_star is None:
            return None
        if self.tour_star == 0:
            return 1.0
        return self.tour_length / self.tour_star


def closest_super_leader(d: DistanceOracle, home: NodeId, candidates: list[SuperLeader]) -> Optional[SuperLeader]:
    """Nearest candidate to `home`; ties go to the lower level, then the lower leader id."""
    if not candidates:
        return None
    return min(candidates, key=lambda s: (d(home, s.node), s.level, s.node))


def assign_multi(sc: Scenario, h: PartitionHierarchy) -> MultiAssignment:
    v_prime = common_home(sc)
    per_object: dict[int, SuperLeaderAssignment] = {}
    per_object_prune: dict[int, PruneReport] = {}
    for obj in sorted(o.id for o in sc.objects):
        needing = [t for t in sc.transactions if obj in t.objs]
        assignment = elect_super_leaders(sc, h, needing)
        per_object[obj] = assignment
        per_object_prune[obj] = prune_levels(sc, assignment, h.params.I, sc.config.prune_factor)

    chosen: dict[int, Optional[SuperLeader]] = {}
    for t in sorted(sc.transactions, key=lambda t: t.id):
        candidates = [
            s for obj in t.objs if (s := per_object_prune[obj].dispositions.get(t.id)) is not None
        ]
        chosen[t.id] = closest_super_leader(sc.dist, t.home, candidates)

    logger.debug(f"Multi-object assignment for {sc.scenario_id}: {len(chosen)} transactions, objects={len(per_object)}")
    return MultiAssignment(v_prime=v_prime, per_object=per_object, per_object_prune=per_object_prune, chosen=chosen)


def schedule_multi(
    sc: Scenario,
    h: PartitionHierarchy,
    tour_kind: TourKind = TourKind.MST,
    universal: Optional[UniversalOrder] = None,
) -> MultiScheduleResult:
    assignment = assign_multi(sc, h)
    v_prime = assignment.v_prime
    if tour_kind == TourKind.UNIVERSAL and universal is None:
        universal = universal_order(h)
    tour = make_tour(tour_kind, sc.dist, assignment.s_f_nodes, v_prime, universal)

    schedule = tour_schedule(sc, assignment.per_txn, tour.visits)
    cost = schedule_cost(sc, schedule)

    paths = object_paths(schedule)
    required_stops = {o.id: tuple(paths.get(o.id, [v_prime])) for o in sc.objects}
    object_travel = {
        obj: sc.cost.alpha * sum(sc.dist(a, b) for a, b in zip(stops, stops[1:]))
        for obj, stops in required_stops.items()
    }
    return MultiScheduleResult(
        assignment=assignment,
        tour=tour,
        schedule=schedule,
        cost=cost,
        tour_length=tour_length(sc.dist, tour),
        tour_star=optimal_tour_length(sc, assignment.s_f_nodes, v_prime),
        required_stops=required_stops,
        object_travel=object_travel,
    )


def single_object_costs(
    sc: Scenario,
    h: PartitionHierarchy,
    tour_kind: TourKind = TourKind.MST,
    universal: Optional[UniversalOrder] = None,
) -> dict[int, float]:
    """C_single(o) for every object: the single-object scheduler on the object's own transactions."""
    return {
        o.id: schedule_single(restrict_to_object(sc, o.id), h, tour_kind, universal).cost.total
        for o in sorted(sc.objects, key=lambda o: o.id)
    }
