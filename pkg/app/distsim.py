"""Fully distributed three-phase scheduling protocol on the lockstep network.

The hierarchy H and the graph metric are static common knowledge; every node only learns
about transactions through messages.

Phase 1 (election): nodes report their transactions to their level-0 leader. A level-l
leader evaluates in round l+1 and counts the still-unassigned transactions per object
from the per-origin counts it received. A leader that reaches 2*gamma becomes a
super-leader and sends a notification down the reporting chain to the origin nodes.
Otherwise it forwards the counts to the level-(l+1) leaders owning those origins.
Elected super-leaders ride along on the counts up to the top leader.

Phase 2 (pruning): the top leader tells each super-leader the reference leader of its
level, the lowest node id at that level. Tallies are summed there and broadcast back. A
level below prune_factor * I * alpha is unmarked, and its origins are redirected to v'.
Each transaction then picks its closest remaining super-leader, and the origins register
their stops with v'.

Phase 3 (execution): transactions move to their stops, and v' sends the objects along
the tour. Only movement messages are sent in this phase, so its cost is exactly the
schedule cost.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import simpy

from app.errors import InvariantViolation, ValidationError
from app.hierarchy import TRIVIAL_LEVEL, PartitionHierarchy
from app.metric_graph import DistanceOracle, NodeId
from app.models import TourKind, TransactionSpec
from app.multi_scheduler import closest_super_leader
from app.network_sim import CostClass, Message, MessageKind, MessageLog, Network, NodeProcess
from app.sched_core import (
    CostBreakdown,
    Execute,
    MoveObject,
    MoveTransaction,
    Scenario,
    Schedule,
    common_home,
    schedule_cost,
)
from app.single_scheduler import SuperLeader
from app.tours import TourOrder, UniversalOrder, make_tour, universal_order

logger = logging.getLogger(__name__)

PHASE_ELECTION = 1
PHASE_PRUNING = 2
PHASE_EXECUTION = 3

# round in which origins choose their stop, once redirect notices have arrived
DECIDE_ROUND = 4
PRUNING_ROUNDS = DECIDE_ROUND + 2


@dataclass(frozen=True)
class CommonKnowledge:
    h: PartitionHierarchy
    metric: DistanceOracle
    v_prime: NodeId
    object_ids: tuple[int, ...]
    gamma: int
    prune_bar: float

    @property
    def top(self) -> int:
        return self.h.params.h + 1


@dataclass(frozen=True)
class TxnInfo:
    origin: NodeId
    txns: tuple[tuple[int, tuple[int, ...]], ...]


@dataclass(frozen=True)
class CountUp:
    level: int
    # (object, origin node, unassigned count)
    counts: tuple[tuple[int, NodeId, int], ...]
    elected: tuple[tuple[int, SuperLeader], ...] = ()


@dataclass(frozen=True)
class DownNotify:
    obj: int
    leader: SuperLeader
    origins: tuple[NodeId, ...]
    at_level: int


@dataclass(frozen=True)
class ReferenceNotice:
    obj: int
    leader: SuperLeader
    reference: NodeId
    expected: int


@dataclass(frozen=True)
class TallyReport:
    obj: int
    level: int
    count: int


@dataclass(frozen=True)
class TallySum:
    obj: int
    level: int
    total: int


@dataclass(frozen=True)
class Redirect:
    obj: int
    leader: SuperLeader


@dataclass(frozen=True)
class StopRegistration:
    stops: tuple[tuple[NodeId, tuple[int, ...]], ...]


@dataclass(frozen=True)
class TxnTransfer:
    txn: int
    objs: tuple[int, ...]


@dataclass(frozen=True)
class ObjectTransfer:
    obj: int
    stops: tuple[NodeId, ...]
    # tour indexes still to visit, the first one is this hop's target
    steps: tuple[int, ...]


class ProtocolNode(NodeProcess):
    def __init__(self, node: NodeId, network: Network, ctx: CommonKnowledge, local: list[TransactionSpec]):
        super().__init__(node, network)
        self.ctx = ctx
        self.local = sorted(local, key=lambda t: t.id)
        self.led_levels = {l for l in range(0, ctx.top + 1) if ctx.h.level(l).cluster_of(node).leader == node}

        # leader role
        self.counts: dict[int, dict[tuple[int, NodeId], int]] = defaultdict(dict)
        self.reporters: dict[int, dict[tuple[int, NodeId], NodeId]] = defaultdict(dict)
        self.elected_below: dict[int, set[tuple[int, SuperLeader]]] = defaultdict(set)
        self.elections: dict[tuple[int, SuperLeader], dict[NodeId, int]] = {}
        self.known_s: tuple[tuple[int, SuperLeader], ...] = ()
        self.survived: dict[tuple[int, SuperLeader], bool] = {}
        # reference leader role
        self.expected: dict[tuple[int, int], int] = {}
        self.tally_reports: dict[tuple[int, int], list[tuple[NodeId, int]]] = defaultdict(list)
        self.summed: set[tuple[int, int]] = set()
        # origin role
        self.bound: dict[int, Optional[SuperLeader]] = {}
        self.chosen: dict[int, Optional[SuperLeader]] = {}
        self.destinations: dict[int, NodeId] = {}
        # object home role
        self.registered: dict[NodeId, set[int]] = defaultdict(set)
        self.tour_kind = TourKind.MST
        self.universal: Optional[UniversalOrder] = None
        self.tour: Optional[TourOrder] = None
        # execution
        self.waiting: dict[int, tuple[int, ...]] = {}
        self.held: dict[int, tuple[tuple[NodeId, ...], tuple[int, ...]]] = {}

    def configure_tour(self, kind: TourKind, universal: Optional[UniversalOrder]) -> None:
        self.tour_kind = kind
        self.universal = universal

    def on_round(self, phase: int, round_no: int, inbox: list[Message]) -> None:
        match phase:
            case 1:
                self._election_round(round_no, inbox)
            case 2:
                self._pruning_round(round_no, inbox)
            case 3:
                self._execution_round(round_no, inbox)
            case _:
                raise InvariantViolation(f"Unknown protocol phase {phase}")

    # phase 1

    def _election_round(self, round_no: int, inbox: list[Message]) -> None:
        for message in inbox:
            match message.payload:
                case TxnInfo(origin=origin, txns=txns):
                    for _, objs in txns:
                        for obj in objs:
                            key = (obj, origin)
                            self.counts[0][key] = self.counts[0].get(key, 0) + 1
                            self.reporters[0][key] = origin
                case CountUp(level=level, counts=counts, elected=elected):
                    for obj, origin, count in counts:
                        self.counts[level][(obj, origin)] = count
                        self.reporters[level][(obj, origin)] = message.src
                    self.elected_below[level].update(elected)
                case DownNotify(obj=obj, leader=leader, origins=origins, at_level=at_level):
                    self._notify_down(obj, leader, origins, at_level)
                case other:
                    raise InvariantViolation(f"Unexpected phase-1 payload {other!r}")

        if round_no == 0 and self.local:
            leader = self.ctx.h.level(0).cluster_of(self.node).leader
            info = TxnInfo(origin=self.node, txns=tuple((t.id, t.objs) for t in self.local))
            self.send(leader, MessageKind.TXN_INFO, info)
        if round_no - 1 in self.led_levels:
            self._evaluate(round_no - 1)

    def _notify_down(self, obj: int, leader: SuperLeader, origins: tuple[NodeId, ...], at_level: int) -> None:
        if at_level == TRIVIAL_LEVEL:
            self.bound[obj] = leader
            return
        groups: dict[NodeId, list[NodeId]] = defaultdict(list)
        for origin in origins:
            groups[self.reporters[at_level][(obj, origin)]].append(origin)
        for reporter, members in sorted(groups.items()):
            notify = DownNotify(obj=obj, leader=leader, origins=tuple(sorted(members)), at_level=at_level - 1)
            self.send(reporter, MessageKind.SUPER_LEADER_NOTIFY, notify)

    def _evaluate(self, level: int) -> None:
        by_obj: dict[int, dict[NodeId, int]] = defaultdict(dict)
        for (obj, origin), count in self.counts.get(level, {}).items():
            by_obj[obj][origin] = count

        forward: dict[NodeId, list[tuple[int, NodeId, int]]] = defaultdict(list)
        elected_now: list[tuple[int, SuperLeader]] = []
        for obj in sorted(by_obj):
            origins = by_obj[obj]
            total = sum(origins.values())
            if total >= 2 * self.ctx.gamma:
                leader = SuperLeader(node=self.node, level=level)
                self.elections[(obj, leader)] = dict(origins)
                elected_now.append((obj, leader))
                logger.debug(f"Node {self.node} elected super-leader for object {obj} at level {level} ({total})")
                self._notify_down(obj, leader, tuple(sorted(origins)), level)
            elif level < self.ctx.top:
                upper = self.ctx.h.level(level + 1)
                for origin, count in sorted(origins.items()):
                    forward[upper.cluster_of(origin).leader].append((obj, origin, count))

        carried = tuple(sorted(self.elected_below.get(level, set()) | set(elected_now)))
        if level == self.ctx.top:
            self.known_s = carried
            return
        parent = self.ctx.h.level(level + 1).cluster_of(self.node).leader
        targets = set(forward) | ({parent} if carried else set())
        for dst in sorted(targets):
            report = CountUp(
                level=level + 1, counts=tuple(forward.get(dst, ())), elected=carried if dst == parent else ()
            )
            self.send(dst, MessageKind.COUNT_UP, report)

    # phase 2

    def _pruning_round(self, round_no: int, inbox: list[Message]) -> None:
        if round_no == 0 and self.known_s:
            self._announce_references()

        for message in inbox:
            match message.payload:
                case ReferenceNotice(obj=obj, leader=leader, reference=reference, expected=expected):
                    self.expected[(obj, leader.level)] = expected
                    count = sum(self.elections[(obj, leader)].values())
                    report = TallyReport(obj=obj, level=leader.level, count=count)
                    self.send(reference, MessageKind.TALLY_REPORT, report)
                case TallyReport(obj=obj, level=level, count=count):
                    self.tally_reports[(obj, level)].append((message.src, count))
                case TallySum(obj=obj, level=level, total=total):
                    self._apply_tally(obj, level, total)
                case Redirect(obj=obj, leader=leader):
                    if self.bound.get(obj) == leader:
                        self.bound[obj] = None
                case StopRegistration(stops=stops):
                    for stop, objs in stops:
                        self.registered[stop].update(objs)
                case other:
                    raise InvariantViolation(f"Unexpected phase-2 payload {other!r}")

        for key, reports in sorted(self.tally_reports.items()):
            if key in self.summed or len(reports) < self.expected.get(key, len(reports) + 1):
                continue
            self.summed.add(key)
            total = sum(count for _, count in reports)
            for sender in sorted({sender for sender, _ in reports}):
                self.send(sender, MessageKind.TALLY_SUM, TallySum(obj=key[0], level=key[1], total=total))

        if round_no == DECIDE_ROUND and self.local:
            self._choose_stops()

    def _announce_references(self) -> None:
        by_level: dict[tuple[int, int], list[SuperLeader]] = defaultdict(list)
        for obj, leader in self.known_s:
            by_level[(obj, leader.level)].append(leader)
        for (obj, _), leaders in sorted(by_level.items()):
            reference = min(s.node for s in leaders)
            for leader in sorted(leaders):
                notice = ReferenceNotice(obj=obj, leader=leader, reference=reference, expected=len(leaders))
                self.send(leader.node, MessageKind.SUPER_LEADER_NOTIFY, notice)

    def _apply_tally(self, obj: int, level: int, total: int) -> None:
        leader = SuperLeader(node=self.node, level=level)
        kept = total >= self.ctx.prune_bar
        self.survived[(obj, leader)] = kept
        if kept:
            return
        for origin in sorted(self.elections[(obj, leader)]):
            self.send(origin, MessageKind.SUPER_LEADER_NOTIFY, Redirect(obj=obj, leader=leader))

    def _choose_stops(self) -> None:
        stops: dict[NodeId, set[int]] = defaultdict(set)
        for t in self.local:
            candidates = [s for obj in t.objs if (s := self.bound.get(obj)) is not None]
            chosen = closest_super_leader(self.ctx.metric, self.node, candidates)
            self.chosen[t.id] = chosen
            destination = chosen.node if chosen is not None else self.ctx.v_prime
            self.destinations[t.id] = destination
            if destination != self.ctx.v_prime:
                stops[destination].update(t.objs)
        if stops:
            registration = StopRegistration(
                stops=tuple((stop, tuple(sorted(objs))) for stop, objs in sorted(stops.items()))
            )
            self.send(self.ctx.v_prime, MessageKind.SUPER_LEADER_NOTIFY, registration)

    # phase 3

    def _execution_round(self, round_no: int, inbox: list[Message]) -> None:
        if round_no == 0:
            self._start_execution()

        for message in inbox:
            match message.payload:
                case TxnTransfer(txn=txn, objs=objs):
                    self.waiting[txn] = objs
                    self.record(MoveTransaction(txn=txn, src=message.src, dst=self.node))
                case ObjectTransfer(obj=obj, stops=stops, steps=steps):
                    self.held[obj] = (stops, steps[1:])
                    self.record(MoveObject(obj=obj, src=message.src, dst=self.node))
                case other:
                    raise InvariantViolation(f"Unexpected phase-3 payload {other!r}")

        if round_no >= 1:
            for txn in sorted(self.waiting):
                if all(obj in self.held for obj in self.waiting[txn]):
                    self.record(Execute(txn=txn, node=self.node))
                    del self.waiting[txn]

        for obj, (stops, steps) in sorted(self.held.items()):
            if steps and steps[0] == round_no:
                del self.held[obj]
                self.send(
                    stops[steps[0]],
                    MessageKind.OBJECT_TRANSFER,
                    ObjectTransfer(obj=obj, stops=stops, steps=steps),
                    CostClass.OBJECT,
                )

    def _start_execution(self) -> None:
        for t in self.local:
            destination = self.destinations[t.id]
            if destination == self.node:
                self.waiting[t.id] = t.objs
            else:
                self.send(destination, MessageKind.TXN_TRANSFER, TxnTransfer(txn=t.id, objs=t.objs), CostClass.TXN)

        if self.node != self.ctx.v_prime:
            return
        self.tour = make_tour(self.tour_kind, self.ctx.metric, sorted(self.registered), self.node, self.universal)
        stops = self.tour.visits
        for obj in self.ctx.object_ids:
            steps = tuple(i for i, stop in enumerate(stops) if i > 0 and obj in self.registered.get(stop, ()))
            self.held[obj] = (stops, steps)


@dataclass(frozen=True)
class Phase1Result:
    network: Network = field(repr=False)
    processes: dict[NodeId, ProtocolNode] = field(repr=False)
    super_leaders: dict[int, tuple[SuperLeader, ...]]
    # per object: transaction -> super-leader it was bound to at election time
    dedicated: dict[int, dict[int, Optional[SuperLeader]]]
    log: MessageLog


@dataclass(frozen=True)
class Phase2Result:
    network: Network = field(repr=False)
    processes: dict[NodeId, ProtocolNode] = field(repr=False)
    dispositions: dict[int, dict[int, Optional[SuperLeader]]]
    s_f: dict[int, tuple[SuperLeader, ...]]
    chosen: dict[int, Optional[SuperLeader]]
    destinations: dict[int, NodeId]
    stops: tuple[NodeId, ...]
    log: MessageLog


@dataclass(frozen=True)
class Phase3Result:
    schedule: Schedule
    tour: TourOrder
    log: MessageLog


@dataclass(frozen=True)
class DistributedRun:
    phase1: Phase1Result
    phase2: Phase2Result
    phase3: Phase3Result
    log: MessageLog
    cost: CostBreakdown

    @property
    def schedule(self) -> Schedule:
        return self.phase3.schedule

    @property
    def c_prime(self) -> float:
        return self.log.cost()

    def phase_cost(self, phase: int) -> float:
        return self.log.cost(phase)


def _bindings(sc: Scenario, processes: dict[NodeId, ProtocolNode]) -> dict[int, dict[int, Optional[SuperLeader]]]:
    """Per object, what each origin node knows about its transactions' super-leader."""
    bindings: dict[int, dict[int, Optional[SuperLeader]]] = {o.id: {} for o in sc.objects}
    for t in sorted(sc.transactions, key=lambda t: t.id):
        for obj in t.objs:
            bindings[obj][t.id] = processes[t.home].bound.get(obj)
    return bindings


def run_phase1(sc: Scenario, h: PartitionHierarchy) -> Phase1Result:
    v_prime = common_home(sc)
    env = simpy.Environment()
    weights = {
        CostClass.CONTROL: sc.config.control_weight,
        CostClass.TXN: sc.cost.beta,
        CostClass.OBJECT: sc.cost.alpha,
    }
    network = Network(env, sc.dist, weights)
    ctx = CommonKnowledge(
        h=h,
        metric=sc.dist,
        v_prime=v_prime,
        object_ids=tuple(sorted(o.id for o in sc.objects)),
        gamma=sc.cost.gamma,
        prune_bar=sc.config.prune_factor * h.params.I * sc.cost.alpha,
    )
    local: dict[NodeId, list[TransactionSpec]] = defaultdict(list)
    for t in sc.transactions:
        local[t.home].append(t)
    processes = {v: ProtocolNode(v, network, ctx, local.get(v, [])) for v in range(sc.n)}
    for process in processes.values():
        network.add_node(process)

    network.run_phase(PHASE_ELECTION, min_rounds=ctx.top + 2)

    root = processes[h.level(ctx.top).clusters[0].leader]
    super_leaders: dict[int, list[SuperLeader]] = {obj: [] for obj in ctx.object_ids}
    for obj, leader in root.known_s:
        super_leaders[obj].append(leader)
    logger.debug(f"Phase 1 for {sc.scenario_id}: {len(root.known_s)} super-leaders, cost={network.log.cost(1):g}")
    return Phase1Result(
        network=network,
        processes=processes,
        super_leaders={obj: tuple(sorted(ls)) for obj, ls in super_leaders.items()},
        dedicated=_bindings(sc, processes),
        log=network.log.phase_slice(PHASE_ELECTION),
    )


def run_phase2(sc: Scenario, h: PartitionHierarchy, phase1: Phase1Result) -> Phase2Result:
    network, processes = phase1.network, phase1.processes
    network.run_phase(PHASE_PRUNING, min_rounds=PRUNING_ROUNDS)

    s_f: dict[int, list[SuperLeader]] = {o.id: [] for o in sc.objects}
    for process in processes.values():
        for (obj, leader), kept in process.survived.items():
            if kept:
                s_f[obj].append(leader)
    chosen: dict[int, Optional[SuperLeader]] = {}
    destinations: dict[int, NodeId] = {}
    for t in sorted(sc.transactions, key=lambda t: t.id):
        chosen[t.id] = processes[t.home].chosen[t.id]
        destinations[t.id] = processes[t.home].destinations[t.id]
    stops = tuple(sorted(processes[common_home(sc)].registered))
    return Phase2Result(
        network=network,
        processes=processes,
        dispositions=_bindings(sc, processes),
        s_f={obj: tuple(sorted(ls)) for obj, ls in s_f.items()},
        chosen=chosen,
        destinations=destinations,
        stops=stops,
        log=network.log.phase_slice(PHASE_PRUNING),
    )


def run_phase3(
    sc: Scenario,
    h: PartitionHierarchy,
    phase2: Phase2Result,
    tour_kind: TourKind = TourKind.MST,
    universal: Optional[UniversalOrder] = None,
) -> Phase3Result:
    network, processes = phase2.network, phase2.processes
    if tour_kind == TourKind.UNIVERSAL and universal is None:
        universal = universal_order(h)
    for process in processes.values():
        process.configure_tour(tour_kind, universal)

    network.run_phase(PHASE_EXECUTION, min_rounds=2)

    leftover = sorted(t for p in processes.values() for t in p.waiting)
    if leftover:
        raise InvariantViolation(f"Transactions {leftover} never executed in phase 3")
    tour = processes[common_home(sc)].tour
    if tour is None:
        raise InvariantViolation("Object home never computed a tour")
    return Phase3Result(schedule=network.schedule(), tour=tour, log=network.log.phase_slice(PHASE_EXECUTION))


def _run(
    sc: Scenario, h: PartitionHierarchy, tour_kind: TourKind, universal: Optional[UniversalOrder]
) -> DistributedRun:
    phase1 = run_phase1(sc, h)
    phase2 = run_phase2(sc, h, phase1)
    phase3 = run_phase3(sc, h, phase2, tour_kind, universal)
    log = phase1.network.log
    cost = schedule_cost(sc, phase3.schedule)
    logger.debug(
        f"Distributed run {sc.scenario_id}: C'={log.cost():g} (p1={log.cost(1):g} p2={log.cost(2):g} "
        f"p3={log.cost(3):g}) C={cost.total:g}"
    )
    return DistributedRun(phase1=phase1, phase2=phase2, phase3=phase3, log=log, cost=cost)


def run_distributed_single(
    sc: Scenario,
    h: PartitionHierarchy,
    tour_kind: TourKind = TourKind.MST,
    universal: Optional[UniversalOrder] = None,
) -> DistributedRun:
    if not sc.is_single_object:
        raise ValidationError(f"Single-object protocol needs exactly one object, got {len(sc.objects)}")
    return _run(sc, h, tour_kind, universal)


def run_distributed_multi(
    sc: Scenario,
    h: PartitionHierarchy,
    tour_kind: TourKind = TourKind.MST,
    universal: Optional[UniversalOrder] = None,
) -> DistributedRun:
    common_home(sc)
    return _run(sc, h, tour_kind, universal)
