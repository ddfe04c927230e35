import pytest

from app.corpus import DEFAULT_ALPHAS, corpus, graph_corpus, unit_disk_radius
from app.errors import ValidationError
from app.scenario_io import dumps_scenario, loads_scenario
from app.sched_core import common_home


def test_empty_corpus():
    assert corpus(seed=1, count=0) == []


def test_same_seed_same_corpus():
    assert corpus(seed=9, count=6) == corpus(seed=9, count=6)
    assert corpus(seed=9, count=6) != corpus(seed=10, count=6)


def test_corpus_respects_bounds():
    scenarios = corpus(seed=3, count=20, max_nodes=10, max_txns=6)
    assert [sc.scenario_id for sc in scenarios[:2]] == ["c3-000", "c3-001"]
    for sc in scenarios:
        assert 2 <= sc.n <= 10
        assert 1 <= len(sc.transactions) <= 6
        assert sc.cost.alpha in DEFAULT_ALPHAS
        assert sc.cost.beta == 1
        assert sc.is_single_object


def test_multi_object_corpus_shares_one_home():
    for sc in corpus(seed=4, count=10, max_nodes=8, max_txns=4, max_k=2):
        assert len(sc.objects) == 2
        assert sc.k <= 2
        assert common_home(sc) == sc.objects[0].home


def test_corpus_scenarios_survive_the_file_format():
    for sc in corpus(seed=5, count=8):
        assert loads_scenario(dumps_scenario(sc), sc.scenario_id) == sc


def test_prune_factor_is_carried_into_config():
    assert {sc.config.prune_factor for sc in corpus(seed=6, count=4, prune_factor=0.0)} == {0.0}


def test_graph_corpus():
    graphs = graph_corpus(seed=0, count=4, max_grid=5, max_unit_disk=30)
    assert len(graphs) == 4
    assert all(g.n >= 4 for g in graphs)


def test_unit_disk_radius_shrinks_with_n():
    assert unit_disk_radius(1) == 1.0
    assert unit_disk_radius(200) < unit_disk_radius(20) <= 1.5


def test_two_node_bound_is_never_exceeded():
    for sc in corpus(seed=8, count=30, max_nodes=2, max_txns=1):
        assert sc.n == 2
        assert len(sc.transactions) == 1


@pytest.mark.parametrize(
    "bounds, message",
    [
        ({"max_nodes": 1}, "max_nodes"),
        ({"max_txns": 0}, "max_txns"),
        ({"max_k": 0}, "max_k"),
        ({"count": -1}, "count"),
        ({"seed": -3}, "seed"),
    ],
)
def test_unusable_bounds_are_rejected(bounds, message):
    args = {"seed": 1, "count": 2} | bounds
    with pytest.raises(ValidationError, match=message):
        corpus(**args)


def test_graph_corpus_rejects_tiny_bounds():
    with pytest.raises(ValidationError, match="max_grid"):
        graph_corpus(seed=0, count=2, max_grid=1)
