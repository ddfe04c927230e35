import pytest

from app.corpus import corpus
from app.harness import (
    CSV_SCHEMA,
    TIMING_COLUMN,
    applicable,
    direct_bound,
    message_trace,
    partition_reports,
    prepare,
    run_algorithm,
    run_experiment,
    summarize,
    theorem_rhs,
    universal_quality,
    write_csv,
)
from app.hierarchy import PartitionParams, build_hierarchy
from app.metric_graph import all_pairs_distances
from app.models import Algorithm, TourKind
from app.sched_core import direct_schedule, schedule_cost

ALL = list(Algorithm)
TOURS = [TourKind.MST, TourKind.UNIVERSAL]


def test_theorem_rhs_constants():
    params = PartitionParams(sigma=2.0, rho=8.0, h=1, I=2, delta=1, zeta=4.0)
    single = 74 * 1.5 * 2 * 4.0 * 2 * 2.0 * 8.0 * 3.0 + 36 * 3 * 2 * 3.0 + 4 * 3.0 * 2.0
    assert theorem_rhs(3.0, 1.5, params, 2.0) == pytest.approx(single)
    assert theorem_rhs(3.0, 1.5, params, 2.0, k=2) == pytest.approx(2 * single)


def test_direct_bound():
    assert direct_bound(4.0, transactions=6, alpha=2.0, log2_d=2.0) == pytest.approx(4 * (3 + 2) * 4.0)


def test_applicable(make_scenario):
    single = make_scenario([(4, [0])])
    multi = make_scenario([(4, [0, 1])], homes=(0, 0))
    assert all(applicable(single, a) for a in ALL)
    assert not applicable(multi, Algorithm.SINGLE_GLOBAL)
    assert not applicable(multi, Algorithm.SINGLE_DIST)
    assert applicable(multi, Algorithm.MULTI_DIST)


def test_direct_record(make_scenario):
    sc = make_scenario([(4, [0]), (3, [0])], alpha=4.0)
    record = run_algorithm(prepare(sc), Algorithm.DIRECT, TourKind.MST)
    assert record.cost == schedule_cost(sc, direct_schedule(sc)).total == 7
    assert record.c_star == 7
    assert record.ratio == 1.0
    assert record.rhs == pytest.approx(4 * (2 / 4.0 + 2.0) * 7)
    assert record.violations == ""
    assert record.h == 1
    assert record.measured_i == 2


def test_distributed_record_fills_message_costs(make_scenario):
    sc = make_scenario([(4, [0])] * 4 + [(1, [0])], alpha=2.0)
    record = run_algorithm(prepare(sc), Algorithm.SINGLE_DIST, TourKind.MST)
    assert record.violations == ""
    assert record.message_cost_p3 == pytest.approx(record.cost)
    assert record.message_cost == pytest.approx(
        record.message_cost_p1 + record.message_cost_p2 + record.message_cost_p3
    )
    assert record.phase1_bound_ok is not None


def test_forced_survivors_skip_bound_checks_but_keep_equivalence(make_scenario):
    sc = make_scenario([(4, [0])] * 4 + [(1, [0])] * 4, alpha=2.0, prune_factor=0.0)
    ctx = prepare(sc)
    for algorithm in ALL:
        record = run_algorithm(ctx, algorithm, TourKind.MST)
        assert record.violations == "", record.violations
    assert run_algorithm(ctx, Algorithm.SINGLE_GLOBAL, TourKind.MST).s_f_size == 2


def test_one_record_per_applicable_combination(make_scenario):
    single = make_scenario([(4, [0]), (2, [0])], scenario_id="single")
    multi = make_scenario([(4, [0, 1]), (2, [1])], homes=(0, 0), scenario_id="multi")
    records = run_experiment([single, multi], ALL, TOURS)
    assert len(records) == 5 * 2 + 3 * 2
    assert [r.scenario_id for r in records] == ["single"] * 10 + ["multi"] * 6
    assert all(r.violations == "" and r.error == "" for r in records)


def test_scenario_tour_used_without_explicit_tours(make_scenario):
    records = run_experiment([make_scenario([(4, [0])])], [Algorithm.DIRECT])
    assert [r.tour for r in records] == ["mst"]


def test_run_id_is_stamped(make_scenario):
    records = run_experiment([make_scenario([(4, [0])])], [Algorithm.DIRECT], run_id="abc")
    assert records[0].run_id == "abc"


def test_csv_is_deterministic_and_ordered():
    scenarios = corpus(seed=7, count=4, max_nodes=7, max_txns=4)
    first = write_csv(run_experiment(scenarios, ALL, TOURS))
    second = write_csv(run_experiment(scenarios, ALL, TOURS, workers=2))
    assert first == second
    header = first.splitlines()[0].split(",")
    assert header == list(CSV_SCHEMA)
    assert len(first.splitlines()) == 1 + 4 * 5 * 2


def test_timings_column_is_optional(make_scenario, tmp_path):
    records = run_experiment([make_scenario([(4, [0])])], [Algorithm.DIRECT])
    out = tmp_path / "runs.csv"
    text = write_csv(records, out, timings=True)
    assert text.splitlines()[0].endswith(TIMING_COLUMN)
    assert out.read_text() == text
    assert TIMING_COLUMN not in write_csv(records)


def test_summarize(make_scenario):
    sc = make_scenario([(4, [0]), (2, [0])])
    frame = summarize(run_experiment([sc], [Algorithm.DIRECT, Algorithm.SINGLE_GLOBAL], TOURS))
    assert frame.height == 4
    assert frame.columns == ["algorithm", "tour", "records", "median_ratio", "max_ratio", "violations", "errors"]
    assert frame["violations"].sum() == 0
    assert frame.row(0)[:2] == ("direct", "mst")


def test_message_trace(make_scenario):
    sc = make_scenario([(4, [0])] * 2)
    trace = message_trace([sc])
    assert trace.height > 0
    assert set(trace["scenario_id"]) == {"test"}
    assert set(trace["kind"]) >= {"TxnInfo", "TxnTransfer"}


def test_message_trace_names_the_payload_behind_each_kind(make_scenario):
    elected = make_scenario([(4, [0])] * 4 + [(1, [0])] * 4, alpha=2.0, prune_factor=0.0, scenario_id="elected")
    trace = message_trace([elected, *corpus(seed=311, count=10, max_nodes=10, max_txns=6, prune_factor=0.0)])
    notify = trace.filter(trace["kind"] == "SuperLeaderNotify")
    assert notify.height > 0
    assert set(notify["payload"]) <= {"DownNotify", "ReferenceNotice", "Redirect", "StopRegistration"}
    rest = trace.filter(trace["kind"] != "SuperLeaderNotify")
    assert (rest["payload"] == rest["kind"]).all()


def test_universal_quality(path5):
    report = universal_quality(build_hierarchy(all_pairs_distances(path5)), samples=20, seed=1)
    assert 0 < report.samples <= 20
    assert report.kappa_max >= report.kappa_median >= 1.0 - 1e-9


def test_partition_reports(path5):
    reports = partition_reports(build_hierarchy(all_pairs_distances(path5)))
    assert [r.level for r in reports] == [-1, 0, 1, 2]
    assert all(r.exact_cover for r in reports)
