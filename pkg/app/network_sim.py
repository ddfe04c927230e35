"""Lockstep message network on a simpy clock.

Every message sent in round r is delivered at the start of round r+1. Inside a round the
nodes step in ascending id order, and each inbox is sorted by (sender id, message kind)
with per-link FIFO order kept for equal keys. A message costs its class weight times the
metric distance between its endpoints.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import simpy

from app.errors import InvariantViolation
from app.metric_graph import DistanceOracle, NodeId
from app.sched_core import Event, Execute, MoveObject, MoveTransaction, Schedule

logger = logging.getLogger(__name__)

MAX_ROUNDS_PER_PHASE = 10_000


class MessageKind(str, Enum):
    TXN_INFO = "TxnInfo"
    COUNT_UP = "CountUp"
    SUPER_LEADER_NOTIFY = "SuperLeaderNotify"
    TALLY_REPORT = "TallyReport"
    TALLY_SUM = "TallySum"
    TXN_TRANSFER = "TxnTransfer"
    OBJECT_TRANSFER = "ObjectTransfer"


KIND_ORDER = {kind: i for i, kind in enumerate(MessageKind)}


class CostClass(str, Enum):
    CONTROL = "control"
    TXN = "txn"
    OBJECT = "object"


@dataclass(frozen=True)
class Message:
    src: NodeId
    dst: NodeId
    kind: MessageKind
    payload: Any
    cost_class: CostClass = CostClass.CONTROL


@dataclass(frozen=True)
class MessageRecord:
    phase: int
    round: int
    message: Message
    cost: float


@dataclass
class MessageLog:
    records: list[MessageRecord] = field(default_factory=list)

    def cost(self, phase: Optional[int] = None) -> float:
        return sum(r.cost for r in self.records if phase is None or r.phase == phase)

    def control_cost(self, phase: Optional[int] = None) -> float:
        return sum(
            r.cost
            for r in self.records
            if r.message.cost_class == CostClass.CONTROL and (phase is None or r.phase == phase)
        )

    def movement_cost(self, phase: Optional[int] = None) -> float:
        return self.cost(phase) - self.control_cost(phase)

    def count(self, phase: Optional[int] = None, kind: Optional[MessageKind] = None) -> int:
        return sum(
            1 for r in self.records if (phase is None or r.phase == phase) and (kind is None or r.message.kind == kind)
        )

    def phase_slice(self, phase: int) -> "MessageLog":
        return MessageLog(records=[r for r in self.records if r.phase == phase])

    def trace_rows(self) -> list[dict[str, Any]]:
        """One row per message, for the trace CSV; `payload` tells apart the records sharing one kind."""
        return [
            {
                "phase": r.phase,
                "round": r.round,
                "src": r.message.src,
                "dst": r.message.dst,
                "kind": r.message.kind.value,
                "payload": type(r.message.payload).__name__,
                "cost_class": r.message.cost_class.value,
                "cost": r.cost,
            }
            for r in self.records
        ]


class NodeProcess:
    """A network participant. Subclasses act only on their inbox and their own state."""

    def __init__(self, node: NodeId, network: "Network"):
        self.node = node
        self.network = network

    def send(self, dst: NodeId, kind: MessageKind, payload: Any, cost_class: CostClass = CostClass.CONTROL) -> None:
        self.network.send(Message(src=self.node, dst=dst, kind=kind, payload=payload, cost_class=cost_class))

    def record(self, event: Event) -> None:
        self.network.record_event(event)

    def on_round(self, phase: int, round_no: int, inbox: list[Message]) -> None:
        raise NotImplementedError


class Network:
    def __init__(self, env: simpy.Environment, metric: DistanceOracle, weights: dict[CostClass, float]):
        self.env = env
        self.metric = metric
        self.weights = weights
        self.log = MessageLog()
        self.nodes: dict[NodeId, NodeProcess] = {}
        self._phase = 0
        self._in_flight: list[tuple[int, Message]] = []
        self._seq = 0
        self._events: list[tuple[int, int, int, Event]] = []

    def add_node(self, process: NodeProcess) -> None:
        self.nodes[process.node] = process

    def num_nodes(self) -> int:
        return len(self.nodes)

    def send(self, message: Message) -> None:
        if message.dst not in self.nodes:
            raise InvariantViolation(f"Message to unknown node {message.dst}")
        cost = self.weights[message.cost_class] * self.metric(message.src, message.dst)
        self.log.records.append(MessageRecord(phase=self._phase, round=int(self.env.now), message=message, cost=cost))
        self._in_flight.append((self._seq, message))
        self._seq += 1

    def record_event(self, event: Event) -> None:
        """Schedule events sort by (round, moves of transactions, moves of objects, executions, id)."""
        match event:
            case MoveTransaction(txn=txn):
                key = (0, txn)
            case MoveObject(obj=obj):
                key = (1, obj)
            case Execute(txn=txn):
                key = (2, txn)
            case _:
                raise InvariantViolation(f"Unknown schedule event {event!r}")
        self._events.append((int(self.env.now), *key, event))

    def schedule(self) -> Schedule:
        return Schedule(events=tuple(e for *_, e in sorted(self._events, key=lambda item: item[:3])))

    def _deliver(self) -> dict[NodeId, list[Message]]:
        pending = sorted(self._in_flight, key=lambda item: (item[1].src, KIND_ORDER[item[1].kind], item[0]))
        self._in_flight = []
        inboxes: dict[NodeId, list[Message]] = {}
        for _, message in pending:
            inboxes.setdefault(message.dst, []).append(message)
        return inboxes

    def _clock(self, phase: int, min_rounds: int):
        round_no = 0
        while round_no < min_rounds or self._in_flight:
            if round_no >= MAX_ROUNDS_PER_PHASE:
                raise InvariantViolation(f"Phase {phase} did not quiesce after {MAX_ROUNDS_PER_PHASE} rounds")
            inboxes = self._deliver()
            for node in sorted(self.nodes):
                self.nodes[node].on_round(phase, round_no, inboxes.get(node, []))
            round_no += 1
            yield self.env.timeout(1)
        logger.debug(f"Phase {phase} quiesced after {round_no} rounds, {self.log.count(phase)} messages")

    def run_phase(self, phase: int, min_rounds: int) -> None:
        """Step rounds until at least `min_rounds` have passed and no message is in flight."""
        self._phase = phase
        self.env.process(self._clock(phase, min_rounds))
        self.env.run()
