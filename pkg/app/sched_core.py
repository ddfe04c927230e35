"""Problem instances, schedules, schedule validation and dual-flow cost accounting.

A schedule is an ordered list of events. Movement events declare endpoints only; the
entity is assumed to take a shortest path, so costs come from the distance table.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence, Union

from app.errors import InvalidSchedule, ValidationError
from app.metric_graph import DistanceOracle, NodeId, WeightedGraph, all_pairs_distances
from app.models import CostModel, ObjectSpec, ScenarioConfig, TransactionSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """One problem instance: graph, cost model, object homes and a batch of transactions."""

    scenario_id: str
    graph: WeightedGraph
    cost: CostModel
    objects: tuple[ObjectSpec, ...]
    transactions: tuple[TransactionSpec, ...]
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    dist: DistanceOracle = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.dist is None:
            object.__setattr__(self, "dist", all_pairs_distances(self.graph))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def k(self) -> int:
        """Largest number of objects any transaction needs."""
        return max((len(t.objs) for t in self.transactions), default=0)

    @property
    def is_single_object(self) -> bool:
        return len(self.objects) == 1

    def object(self, obj_id: int) -> Optional[ObjectSpec]:
        return next((o for o in self.objects if o.id == obj_id), None)

    def transaction(self, txn_id: int) -> Optional[TransactionSpec]:
        return next((t for t in self.transactions if t.id == txn_id), None)


def validate_scenario(sc: Scenario) -> Scenario:
    """Check ids and homes; raises ValidationError with the first problem found."""
    if not sc.transactions:
        raise ValidationError("Scenario needs at least one transaction")

    object_ids = [o.id for o in sc.objects]
    if len(set(object_ids)) != len(object_ids):
        raise ValidationError(f"Duplicate object ids in {sorted(object_ids)}")
    txn_ids = [t.id for t in sc.transactions]
    if len(set(txn_ids)) != len(txn_ids):
        raise ValidationError(f"Duplicate transaction ids in {sorted(txn_ids)}")

    for o in sc.objects:
        if not 0 <= o.home < sc.n:
            raise ValidationError(f"Object {o.id} has home {o.home} outside 0..{sc.n - 1}")
    known = set(object_ids)
    for t in sc.transactions:
        if not 0 <= t.home < sc.n:
            raise ValidationError(f"Transaction {t.id} has home {t.home} outside 0..{sc.n - 1}")
        missing = sorted(set(t.objs) - known)
        if missing:
            raise ValidationError(f"Transaction {t.id} references unknown objects {missing}")
    return sc


def common_home(sc: Scenario) -> NodeId:
    """v', the node every object starts at."""
    homes = sorted({o.home for o in sc.objects})
    if len(homes) != 1:
        raise ValidationError(f"Objects must share one home node, found homes {homes}")
    return homes[0]


def restrict_to_object(sc: Scenario, obj_id: int) -> Scenario:
    """Single-object sub-scenario: the object plus every transaction that needs it."""
    obj = sc.object(obj_id)
    if obj is None:
        raise ValidationError(f"Unknown object {obj_id}")
    transactions = tuple(
        TransactionSpec(id=t.id, home=t.home, objs=(obj_id,)) for t in sc.transactions if obj_id in t.objs
    )
    return Scenario(
        scenario_id=f"{sc.scenario_id}#o{obj_id}",
        graph=sc.graph,
        cost=sc.cost,
        objects=(obj,),
        transactions=transactions,
        config=sc.config,
        dist=sc.dist,
    )


@dataclass(frozen=True)
class MoveObject:
    obj: int
    src: NodeId
    dst: NodeId


@dataclass(frozen=True)
class MoveTransaction:
    txn: int
    src: NodeId
    dst: NodeId


@dataclass(frozen=True)
class Execute:
    txn: int
    node: NodeId


Event = Union[MoveObject, MoveTransaction, Execute]


@dataclass(frozen=True)
class Schedule:
    events: tuple[Event, ...] = ()

    @property
    def executions(self) -> tuple[Execute, ...]:
        return tuple(e for e in self.events if isinstance(e, Execute))


class ViolationKind(str, Enum):
    MISSING_EXECUTION = "MissingExecution"
    DOUBLE_EXECUTION = "DoubleExecution"
    NOT_COLOCATED = "NotColocated"
    BROKEN_CONTINUITY = "BrokenContinuity"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    message: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.message}"


@dataclass(frozen=True)
class CostBreakdown:
    object_cost: float
    txn_cost: float

    @property
    def total(self) -> float:
        return self.object_cost + self.txn_cost


def validate_schedule(sc: Scenario, s: Schedule) -> list[Violation]:
    """Replay the events and report every broken schedule invariant; empty list means valid."""
    txns = {t.id: t for t in sc.transactions}
    obj_pos = {o.id: o.home for o in sc.objects}
    txn_pos = {t.id: t.home for t in sc.transactions}
    executed = {t.id: 0 for t in sc.transactions}
    violations: list[Violation] = []

    for i, event in enumerate(s.events):
        match event:
            case MoveObject(obj=obj, src=src, dst=dst):
                if obj not in obj_pos:
                    raise InvalidSchedule(f"Event {i} moves unknown object {obj}")
                if obj_pos[obj] != src:
                    violations.append(
                        Violation(
                            ViolationKind.BROKEN_CONTINUITY,
                            f"event {i}: object {obj} moves from {src} but is at {obj_pos[obj]}",
                        )
                    )
                obj_pos[obj] = dst
            case MoveTransaction(txn=txn, src=src, dst=dst):
                if txn not in txn_pos:
                    raise InvalidSchedule(f"Event {i} moves unknown transaction {txn}")
                if txn_pos[txn] != src:
                    violations.append(
                        Violation(
                            ViolationKind.BROKEN_CONTINUITY,
                            f"event {i}: transaction {txn} moves from {src} but is at {txn_pos[txn]}",
                        )
                    )
                txn_pos[txn] = dst
            case Execute(txn=txn, node=node):
                if txn not in txns:
                    raise InvalidSchedule(f"Event {i} executes unknown transaction {txn}")
                executed[txn] += 1
                if executed[txn] > 1:
                    violations.append(
                        Violation(ViolationKind.DOUBLE_EXECUTION, f"event {i}: transaction {txn} executes again")
                    )
                if txn_pos[txn] != node:
                    violations.append(
                        Violation(
                            ViolationKind.NOT_COLOCATED,
                            f"event {i}: transaction {txn} is at {txn_pos[txn]}, not {node}",
                        )
                    )
                for obj in txns[txn].objs:
                    if obj_pos.get(obj) != node:
                        violations.append(
                            Violation(
                                ViolationKind.NOT_COLOCATED,
                                f"event {i}: object {obj} is at {obj_pos.get(obj)} when transaction {txn} "
                                f"executes at {node}",
                            )
                        )
            case _:
                raise InvalidSchedule(f"Event {i} has unknown type {type(event).__name__}")

    for txn, count in sorted(executed.items()):
        if count == 0:
            violations.append(Violation(ViolationKind.MISSING_EXECUTION, f"transaction {txn} never executes"))
    return violations


def schedule_cost(sc: Scenario, s: Schedule) -> CostBreakdown:
    """alpha per unit distance for object moves, beta for transaction moves."""
    violations = validate_schedule(sc, s)
    if violations:
        logger.error(f"Schedule for {sc.scenario_id} has {len(violations)} violations: {violations[0]}")
        raise InvalidSchedule(f"Schedule is invalid: {violations[0]}", violations)

    object_length = 0.0
    txn_length = 0.0
    for event in s.events:
        match event:
            case MoveObject(src=src, dst=dst):
                object_length += sc.dist(src, dst)
            case MoveTransaction(src=src, dst=dst):
                txn_length += sc.dist(src, dst)
    return CostBreakdown(object_cost=sc.cost.alpha * object_length, txn_cost=sc.cost.beta * txn_length)


def tour_schedule(sc: Scenario, destinations: Mapping[int, NodeId], stops: Sequence[NodeId]) -> Schedule:
    """Move every transaction to its destination, then walk the objects along `stops`.

    `stops` starts at the common home v'. An object only visits the stops where some
    transaction needing it executes; at each stop the waiting transactions execute in
    ascending id order once their objects are there.
    """
    v_prime = common_home(sc)
    if not stops or stops[0] != v_prime:
        raise ValueError(f"Stops must start at the object home {v_prime}, got {list(stops)[:1]}")
    missing = sorted({destinations[t.id] for t in sc.transactions} - set(stops))
    if missing:
        raise ValueError(f"Destinations {missing} are not on the stop list")

    events: list[Event] = []
    by_id = sorted(sc.transactions, key=lambda t: t.id)
    for t in by_id:
        if destinations[t.id] != t.home:
            events.append(MoveTransaction(txn=t.id, src=t.home, dst=destinations[t.id]))

    obj_pos = {o.id: o.home for o in sc.objects}
    done: set[NodeId] = set()
    for stop in stops:
        if stop in done:
            continue
        done.add(stop)
        here = [t for t in by_id if destinations[t.id] == stop]
        needed = sorted({obj for t in here for obj in t.objs})
        for obj in needed:
            if obj_pos[obj] != stop:
                events.append(MoveObject(obj=obj, src=obj_pos[obj], dst=stop))
                obj_pos[obj] = stop
        events.extend(Execute(txn=t.id, node=stop) for t in here)
    return Schedule(events=tuple(events))


def object_paths(s: Schedule) -> dict[int, list[NodeId]]:
    """Nodes each object passes through, in order, starting from its first move."""
    paths: dict[int, list[NodeId]] = {}
    for event in s.events:
        if isinstance(event, MoveObject):
            path = paths.setdefault(event.obj, [event.src])
            path.append(event.dst)
    return paths


def direct_schedule(sc: Scenario) -> Schedule:
    """Every transaction travels to v' and executes there in id order; objects stay put."""
    v_prime = common_home(sc)
    return tour_schedule(sc, {t.id: v_prime for t in sc.transactions}, [v_prime])
