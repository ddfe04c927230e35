import pytest

from app.errors import ValidationError
from app.hierarchy import build_hierarchy
from app.metric_graph import all_pairs_distances
from app.multi_scheduler import assign_multi, closest_super_leader, schedule_multi, single_object_costs
from app.sched_core import direct_schedule, validate_schedule
from app.single_scheduler import SuperLeader


def hierarchy(sc):
    return build_hierarchy(sc.dist, sc.config.sigma)


def test_closest_super_leader_tie_breaks(path5):
    d = all_pairs_distances(path5)
    candidates = [SuperLeader(3, 1), SuperLeader(1, 0), SuperLeader(3, 0)]
    assert closest_super_leader(d, 2, candidates) == SuperLeader(1, 0)
    assert closest_super_leader(d, 3, candidates) == SuperLeader(3, 0)
    assert closest_super_leader(d, 0, []) is None


def test_shared_super_leader_for_both_objects(make_scenario):
    sc = make_scenario([(4, [0, 1])] * 4, alpha=2.0, homes=(0, 0), prune_factor=0.0)
    h = hierarchy(sc)
    result = schedule_multi(sc, h)
    assert result.assignment.v_prime == 0
    assert set(result.assignment.chosen.values()) == {SuperLeader(4, 0)}
    assert result.assignment.s_f_nodes == (4,)
    assert validate_schedule(sc, result.schedule) == []
    assert result.cost.object_cost == 16
    assert result.cost.txn_cost == 0
    assert result.required_stops == {0: (0, 4), 1: (0, 4)}
    assert result.object_travel == {0: 8, 1: 8}
    assert single_object_costs(sc, h) == {0: 8, 1: 8}


def test_objects_skip_stops_they_are_not_needed_at(make_scenario):
    txns = [(4, [0])] * 4 + [(1, [1])] * 4
    sc = make_scenario(txns, alpha=2.0, homes=(0, 0), prune_factor=0.0)
    result = schedule_multi(sc, hierarchy(sc))
    assert validate_schedule(sc, result.schedule) == []
    assert result.required_stops[0] == (0, 4)
    # object 1 is elected in the cluster around v', so it never leaves home
    assert result.required_stops[1] == (0,)
    assert result.assignment.per_txn[4] == 0


def test_per_object_elections_only_count_their_transactions(make_scenario):
    sc = make_scenario([(4, [0])] * 4 + [(4, [1])], alpha=2.0, homes=(0, 0), prune_factor=0.0)
    assignment = assign_multi(sc, hierarchy(sc))
    assert assignment.per_object[0].super_leaders == (SuperLeader(4, 0),)
    assert assignment.per_object[1].super_leaders == ()
    assert assignment.chosen[4] is None
    assert assignment.per_txn[4] == 0


def test_default_bar_reduces_to_direct(make_scenario):
    sc = make_scenario([(4, [0, 1]), (3, [1]), (2, [0])], alpha=4.0, homes=(0, 0))
    h = hierarchy(sc)
    result = schedule_multi(sc, h)
    assert result.schedule == direct_schedule(sc)
    assert result.cost.total <= sc.k * sum(single_object_costs(sc, h).values())


def test_distinct_homes_rejected(make_scenario):
    sc = make_scenario([(4, [0, 1])], homes=(0, 1))
    with pytest.raises(ValidationError, match="share one home"):
        schedule_multi(sc, hierarchy(sc))
