import pytest
import simpy

from app.errors import InvariantViolation
from app.metric_graph import all_pairs_distances
from app.network_sim import CostClass, MessageKind, Network, NodeProcess
from app.sched_core import Execute, MoveObject, MoveTransaction

WEIGHTS = {CostClass.CONTROL: 1.0, CostClass.TXN: 1.0, CostClass.OBJECT: 3.0}


class Gatherer(NodeProcess):
    """Every node except 0 reports to node 0 in round 0; node 0 remembers what arrives when."""

    def __init__(self, node, network):
        super().__init__(node, network)
        self.seen = []

    def on_round(self, phase, round_no, inbox):
        self.seen.extend((round_no, m.src, m.payload) for m in inbox)
        if round_no == 0 and self.node != 0:
            self.send(0, MessageKind.TXN_INFO, self.node)


@pytest.fixture()
def network(path5):
    net = Network(simpy.Environment(), all_pairs_distances(path5), WEIGHTS)
    for v in range(5):
        net.add_node(Gatherer(v, net))
    return net


def test_messages_arrive_next_round_sorted_by_sender(network):
    network.run_phase(1, min_rounds=1)
    assert network.nodes[0].seen == [(1, 1, 1), (1, 2, 2), (1, 3, 3), (1, 4, 4)]
    assert network.env.now == 2


def test_message_cost_is_weight_times_distance(network):
    network.run_phase(1, min_rounds=1)
    assert network.log.cost() == 1 + 2 + 3 + 4
    assert network.log.cost(1) == 10
    assert network.log.cost(2) == 0
    assert network.log.control_cost() == 10
    assert network.log.movement_cost() == 0
    assert network.log.count(1, MessageKind.TXN_INFO) == 4
    assert network.log.count(kind=MessageKind.OBJECT_TRANSFER) == 0


def test_phase_runs_at_least_min_rounds(network):
    network.run_phase(1, min_rounds=5)
    assert network.env.now == 5


def test_trace_rows(network):
    network.run_phase(1, min_rounds=1)
    rows = network.log.trace_rows()
    assert rows[0] == {
        "phase": 1,
        "round": 0,
        "src": 1,
        "dst": 0,
        "kind": "TxnInfo",
        "payload": "int",
        "cost_class": "control",
        "cost": 1.0,
    }
    assert len(network.log.phase_slice(1).records) == 4


def test_object_messages_use_object_weight(network):
    network.nodes[4].send(0, MessageKind.OBJECT_TRANSFER, None, CostClass.OBJECT)
    assert network.log.cost() == 12
    assert network.log.movement_cost() == 12


def test_unknown_destination_rejected(network):
    with pytest.raises(InvariantViolation, match="unknown node"):
        network.nodes[1].send(9, MessageKind.TXN_INFO, None)


def test_recorded_events_sort_by_round_then_kind(network):
    network.record_event(Execute(txn=0, node=0))
    network.record_event(MoveObject(obj=1, src=0, dst=1))
    network.record_event(MoveTransaction(txn=2, src=3, dst=0))
    network.record_event(MoveTransaction(txn=1, src=4, dst=0))
    assert network.schedule().events == (
        MoveTransaction(txn=1, src=4, dst=0),
        MoveTransaction(txn=2, src=3, dst=0),
        MoveObject(obj=1, src=0, dst=1),
        Execute(txn=0, node=0),
    )
    with pytest.raises(InvariantViolation):
        network.record_event("not an event")
