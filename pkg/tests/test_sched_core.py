import pytest

from app.errors import InvalidSchedule, ValidationError
from app.models import CostModel, ObjectSpec, TransactionSpec
from app.sched_core import (
    Execute,
    MoveObject,
    MoveTransaction,
    Scenario,
    Schedule,
    ViolationKind,
    common_home,
    direct_schedule,
    object_paths,
    restrict_to_object,
    schedule_cost,
    tour_schedule,
    validate_scenario,
    validate_schedule,
)


def kinds(violations):
    return [v.kind for v in violations]


def test_scenario_properties(make_scenario):
    sc = make_scenario([(4, [0]), (3, [0])], alpha=4.0)
    assert sc.n == 5
    assert sc.k == 1
    assert sc.is_single_object
    assert sc.dist(0, 4) == 4
    assert sc.transaction(1).home == 3
    assert sc.transaction(9) is None
    assert sc.cost.gamma == 4


def test_direct_schedule_cost(make_scenario):
    sc = make_scenario([(4, [0]), (3, [0])], alpha=4.0)
    schedule = direct_schedule(sc)
    assert validate_schedule(sc, schedule) == []
    cost = schedule_cost(sc, schedule)
    assert cost.object_cost == 0
    assert cost.txn_cost == 7
    assert cost.total == 7
    assert [e for e in schedule.events if isinstance(e, Execute)] == [Execute(0, 0), Execute(1, 0)]


def test_tour_schedule_event_order(make_scenario):
    sc = make_scenario([(4, [0]), (3, [0])], alpha=4.0)
    schedule = tour_schedule(sc, {0: 3, 1: 3}, [0, 3])
    assert schedule.events == (
        MoveTransaction(txn=0, src=4, dst=3),
        MoveObject(obj=0, src=0, dst=3),
        Execute(txn=0, node=3),
        Execute(txn=1, node=3),
    )
    cost = schedule_cost(sc, schedule)
    assert cost.txn_cost == 1
    assert cost.object_cost == 12
    assert object_paths(schedule) == {0: [0, 3]}


def test_tour_schedule_rejects_bad_stops(make_scenario):
    sc = make_scenario([(4, [0])])
    with pytest.raises(ValueError, match="must start at the object home"):
        tour_schedule(sc, {0: 4}, [4])
    with pytest.raises(ValueError, match="not on the stop list"):
        tour_schedule(sc, {0: 4}, [0])


def test_missing_execution(make_scenario):
    sc = make_scenario([(4, [0]), (3, [0])])
    assert kinds(validate_schedule(sc, Schedule())) == [ViolationKind.MISSING_EXECUTION] * 2


def test_double_execution(make_scenario):
    sc = make_scenario([(0, [0])])
    schedule = Schedule(events=(Execute(0, 0), Execute(0, 0)))
    assert kinds(validate_schedule(sc, schedule)) == [ViolationKind.DOUBLE_EXECUTION]


def test_execution_without_object_is_not_colocated(make_scenario):
    sc = make_scenario([(4, [0])])
    assert kinds(validate_schedule(sc, Schedule(events=(Execute(0, 4),)))) == [ViolationKind.NOT_COLOCATED]


def test_execution_away_from_transaction_is_not_colocated(make_scenario):
    sc = make_scenario([(4, [0])])
    schedule = Schedule(events=(MoveObject(0, 0, 2), Execute(0, 2)))
    assert kinds(validate_schedule(sc, schedule)) == [ViolationKind.NOT_COLOCATED]


def test_broken_continuity(make_scenario):
    sc = make_scenario([(4, [0])])
    schedule = Schedule(events=(MoveObject(0, 3, 4), Execute(0, 4)))
    violations = validate_schedule(sc, schedule)
    assert kinds(violations) == [ViolationKind.BROKEN_CONTINUITY]
    assert str(violations[0]).startswith("BrokenContinuity:")


def test_unknown_entity_raises(make_scenario):
    sc = make_scenario([(4, [0])])
    with pytest.raises(InvalidSchedule, match="unknown object"):
        validate_schedule(sc, Schedule(events=(MoveObject(7, 0, 1),)))


def test_schedule_cost_refuses_invalid_schedule(make_scenario):
    sc = make_scenario([(4, [0])])
    with pytest.raises(InvalidSchedule) as excinfo:
        schedule_cost(sc, Schedule())
    assert excinfo.value.violations[0].kind == ViolationKind.MISSING_EXECUTION


def test_validate_scenario_errors(path5):
    cost = CostModel(alpha=2.0, beta=1.0)
    obj = (ObjectSpec(id=0, home=0),)

    def scenario(objects, transactions):
        return Scenario("bad", path5, cost, objects, transactions)

    with pytest.raises(ValidationError, match="at least one transaction"):
        validate_scenario(scenario(obj, ()))
    with pytest.raises(ValidationError, match="Duplicate transaction"):
        validate_scenario(scenario(obj, (TransactionSpec(id=0, home=1, objs=(0,)),) * 2))
    with pytest.raises(ValidationError, match="outside"):
        validate_scenario(scenario(obj, (TransactionSpec(id=0, home=9, objs=(0,)),)))
    with pytest.raises(ValidationError, match="unknown objects"):
        validate_scenario(scenario(obj, (TransactionSpec(id=0, home=1, objs=(3,)),)))
    with pytest.raises(ValidationError, match="has home 5"):
        validate_scenario(scenario((ObjectSpec(id=0, home=5),), (TransactionSpec(id=0, home=1, objs=(0,)),)))


def test_common_home(make_scenario):
    assert common_home(make_scenario([(4, [0, 1])], homes=(2, 2))) == 2
    with pytest.raises(ValidationError, match="share one home"):
        common_home(make_scenario([(4, [0, 1])], homes=(0, 1)))


def test_restrict_to_object(make_scenario):
    sc = make_scenario([(1, [0]), (2, [0, 1]), (3, [1])], homes=(0, 0))
    assert sc.k == 2
    sub = restrict_to_object(sc, 1)
    assert sub.scenario_id == "test#o1"
    assert sub.is_single_object
    assert [(t.id, t.home, t.objs) for t in sub.transactions] == [(1, 2, (1,)), (2, 3, (1,))]
    with pytest.raises(ValidationError, match="Unknown object"):
        restrict_to_object(sc, 5)


def test_transaction_objects_are_sorted_and_unique():
    assert TransactionSpec(id=0, home=0, objs=(2, 1, 2)).objs == (1, 2)
