from app.models import RunRecord
from app.run_record_service import (
    delete_run,
    get_all_run_records,
    get_run_records_by_run,
    get_run_records_by_scenario,
    get_run_records_count,
    save_run_records,
)


def record(scenario_id: str, algorithm: str = "direct", run_id: str = "r1") -> RunRecord:
    return RunRecord(scenario_id=scenario_id, algorithm=algorithm, tour="mst", cost=3.0, c_star=2.0, run_id=run_id)


def test_empty_store(new_db):
    assert get_all_run_records() == []
    assert get_run_records_count() == 0


def test_save_and_list(new_db):
    saved = save_run_records([record("a"), record("b"), record("a", "multi-global")])
    assert saved == 3
    assert get_run_records_count() == 3

    stored = get_all_run_records()
    assert [r.scenario_id for r in stored] == ["a", "b", "a"]
    assert all(r.id is not None for r in stored)
    assert stored[0].cost == 3.0
    assert stored[0].created_at is not None


def test_save_nothing(new_db):
    assert save_run_records([]) == 0
    assert get_run_records_count() == 0


def test_run_id_override(new_db):
    save_run_records([record("a")], run_id="override")
    assert [r.run_id for r in get_all_run_records()] == ["override"]


def test_lookup_by_scenario(new_db):
    save_run_records([record("a"), record("b"), record("a", "multi-global")])
    assert [r.algorithm for r in get_run_records_by_scenario("a")] == ["direct", "multi-global"]
    assert get_run_records_by_scenario("zzz") == []
    assert get_run_records_by_scenario("") == []


def test_lookup_and_delete_by_run(new_db):
    save_run_records([record("a", run_id="r1"), record("b", run_id="r2"), record("c", run_id="r1")])
    assert [r.scenario_id for r in get_run_records_by_run("r1")] == ["a", "c"]

    assert delete_run("r1") == 2
    assert get_run_records_count() == 1
    assert get_run_records_by_run("r1") == []
    assert delete_run("") == 0
    assert delete_run("missing") == 0
