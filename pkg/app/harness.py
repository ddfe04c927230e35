"""Experiment runner: schedulers against the oracle, cost bounds, run records and CSV tables."""

import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import polars as pl

from app.distsim import DistributedRun, run_distributed_multi, run_distributed_single
from app.errors import SchedulingError
from app.hierarchy import PartitionHierarchy, PartitionParams, PartitionReport, build_hierarchy, verify_partition
from app.models import Algorithm, RunRecord, TourKind
from app.multi_scheduler import schedule_multi, single_object_costs
from app.oracle import (
    MULTI_MAX_NODES,
    MULTI_MAX_TRANSACTIONS,
    SINGLE_MAX_NODES,
    OracleResult,
    optimal_cost_multi,
    optimal_cost_single,
)
from app.sched_core import CostBreakdown, Scenario, Schedule, direct_schedule, schedule_cost, validate_schedule
from app.single_scheduler import schedule_single
from app.tours import UniversalOrder, exact_tour, induced_tour, tour_length, universal_order

logger = logging.getLogger(__name__)

DEFAULT_PRUNE_FACTOR = 8.0
EPS = 1e-9
FLOAT_PRECISION = 6

CSV_SCHEMA: dict[str, pl.DataType] = {
    "scenario_id": pl.Utf8(),
    "algorithm": pl.Utf8(),
    "tour": pl.Utf8(),
    "n": pl.Int64(),
    "transactions": pl.Int64(),
    "k": pl.Int64(),
    "alpha": pl.Float64(),
    "beta": pl.Float64(),
    "cost": pl.Float64(),
    "object_cost": pl.Float64(),
    "txn_cost": pl.Float64(),
    "c_star": pl.Float64(),
    "ratio": pl.Float64(),
    "s_f_size": pl.Int64(),
    "tour_length": pl.Float64(),
    "tour_star": pl.Float64(),
    "message_cost": pl.Float64(),
    "message_cost_p1": pl.Float64(),
    "message_cost_p2": pl.Float64(),
    "message_cost_p3": pl.Float64(),
    "phase1_bound_ok": pl.Boolean(),
    "rhs": pl.Float64(),
    "h": pl.Int64(),
    "measured_i": pl.Int64(),
    "delta": pl.Int64(),
    "zeta": pl.Float64(),
    "diameter": pl.Float64(),
    "violations": pl.Utf8(),
    "error": pl.Utf8(),
}
TIMING_COLUMN = "runtime_s"


@dataclass(frozen=True)
class ScenarioContext:
    """Everything computed once per scenario and shared by all of its runs."""

    sc: Scenario
    h: PartitionHierarchy
    universal: UniversalOrder
    oracle: Optional[OracleResult]


@dataclass(frozen=True)
class UniversalQuality:
    samples: int
    kappa_max: float
    kappa_median: float


def theorem_rhs(c_star: float, tour_ratio: float, params: PartitionParams, log2_d: float, k: int = 1) -> float:
    """Single-object cost bound, scaled by k for the multi-object schedulers."""
    h, zeta, I, sigma, rho = params.h, params.zeta, params.I, params.sigma, params.rho
    single = (
        74 * tour_ratio * (h + 1) * zeta * I * sigma * rho * c_star
        + 36 * (h + 2) * I * c_star
        + 4 * c_star * log2_d
    )
    return k * single


def direct_bound(c_star: float, transactions: int, alpha: float, log2_d: float) -> float:
    return 4 * (transactions / alpha + log2_d) * c_star


def compute_oracle(sc: Scenario) -> Optional[OracleResult]:
    """C* when the instance is small enough for exhaustive search, else None."""
    try:
        if sc.is_single_object and sc.n <= SINGLE_MAX_NODES:
            return optimal_cost_single(sc)
        if sc.n <= MULTI_MAX_NODES and len(sc.transactions) <= MULTI_MAX_TRANSACTIONS:
            return optimal_cost_multi(sc)
    except SchedulingError as e:
        logger.error(f"Oracle failed for {sc.scenario_id}: {e}")
    return None


def prepare(sc: Scenario, with_oracle: bool = True) -> ScenarioContext:
    h = build_hierarchy(sc.dist, sc.config.sigma)
    return ScenarioContext(
        sc=sc,
        h=h,
        universal=universal_order(h),
        oracle=compute_oracle(sc) if with_oracle else None,
    )


def applicable(sc: Scenario, algorithm: Algorithm) -> bool:
    match algorithm:
        case Algorithm.SINGLE_GLOBAL | Algorithm.SINGLE_DIST:
            return sc.is_single_object
        case _:
            return True


def _schedule_violations(sc: Scenario, schedule: Schedule) -> list[str]:
    return [str(v) for v in validate_schedule(sc, schedule)]


def _distributed_violations(
    run: DistributedRun, schedule: Schedule, cost: CostBreakdown, expected: dict[int, dict], chosen: Optional[dict]
) -> list[str]:
    problems: list[str] = []
    for obj, dispositions in expected.items():
        if run.phase2.dispositions.get(obj) != dispositions:
            problems.append(f"distributed dispositions for object {obj} differ from the global-aware ones")
    if chosen is not None and run.phase2.chosen != chosen:
        problems.append("distributed stop choices differ from the global-aware ones")
    if run.schedule != schedule:
        problems.append("distributed schedule differs from the global-aware schedule")
    if abs(run.cost.total - cost.total) > EPS:
        problems.append(f"distributed movement cost {run.cost.total:g} != global-aware cost {cost.total:g}")
    if abs(run.log.movement_cost() - cost.total) > EPS:
        problems.append(f"movement messages cost {run.log.movement_cost():g}, schedule cost {cost.total:g}")
    return problems


def run_algorithm(ctx: ScenarioContext, algorithm: Algorithm, tour: TourKind) -> RunRecord:
    """One record; module errors are caught by the caller."""
    sc, h = ctx.sc, ctx.h
    params = h.params
    c_star = ctx.oracle.c_star if ctx.oracle is not None else None
    log2_d = sc.dist.log2_diameter
    record = RunRecord(
        scenario_id=sc.scenario_id,
        algorithm=algorithm.value,
        tour=tour.value,
        n=sc.n,
        transactions=len(sc.transactions),
        k=sc.k,
        alpha=sc.cost.alpha,
        beta=sc.cost.beta,
        c_star=c_star,
        h=params.h,
        measured_i=params.I,
        delta=params.delta,
        zeta=params.zeta,
        diameter=sc.dist.diameter,
    )
    violations: list[str] = []
    started = time.perf_counter()

    match algorithm:
        case Algorithm.DIRECT:
            schedule = direct_schedule(sc)
            violations += _schedule_violations(sc, schedule)
            cost = schedule_cost(sc, schedule)
            record.s_f_size, record.tour_length, record.tour_star = 0, 0.0, 0.0
            if c_star is not None and sc.is_single_object:
                record.rhs = direct_bound(c_star, len(sc.transactions), sc.cost.alpha, log2_d)

        case Algorithm.SINGLE_GLOBAL | Algorithm.SINGLE_DIST:
            result = schedule_single(sc, h, tour, ctx.universal)
            schedule, cost = result.schedule, result.cost
            violations += _schedule_violations(sc, schedule)
            record.s_f_size = len(result.prune.s_f_nodes)
            record.tour_length, record.tour_star = result.tour_length, result.tour_star
            if c_star is not None and result.tour_ratio is not None:
                record.rhs = theorem_rhs(c_star, result.tour_ratio, params, log2_d)
            if algorithm == Algorithm.SINGLE_DIST:
                run = run_distributed_single(sc, h, tour, ctx.universal)
                obj = sc.objects[0].id
                if set(run.phase1.super_leaders[obj]) != set(result.assignment.super_leaders):
                    violations.append("distributed super-leader set differs from the global-aware election")
                if run.phase1.dedicated[obj] != result.assignment.dedicated:
                    violations.append("distributed election bindings differ from the global-aware election")
                violations += _schedule_violations(sc, run.schedule)
                violations += _distributed_violations(run, schedule, cost, {obj: result.prune.dispositions}, None)
                _fill_messages(record, run, cost)

        case Algorithm.MULTI_GLOBAL | Algorithm.MULTI_DIST:
            result = schedule_multi(sc, h, tour, ctx.universal)
            schedule, cost = result.schedule, result.cost
            violations += _schedule_violations(sc, schedule)
            record.s_f_size = len(result.assignment.s_f_nodes)
            record.tour_length, record.tour_star = result.tour_length, result.tour_star
            if c_star is not None and result.tour_ratio is not None:
                record.rhs = theorem_rhs(c_star, result.tour_ratio, params, log2_d, k=max(sc.k, 1))
            if sc.config.prune_factor == DEFAULT_PRUNE_FACTOR:
                singles = single_object_costs(sc, h, tour, ctx.universal)
                if cost.total > max(sc.k, 1) * sum(singles.values()) + EPS:
                    violations.append(f"multi-object cost {cost.total:g} exceeds k * sum of single-object costs")
            if algorithm == Algorithm.MULTI_DIST:
                run = run_distributed_multi(sc, h, tour, ctx.universal)
                expected = {obj: p.dispositions for obj, p in result.assignment.per_object_prune.items()}
                violations += _schedule_violations(sc, run.schedule)
                violations += _distributed_violations(run, schedule, cost, expected, result.assignment.chosen)
                _fill_messages(record, run, cost)

        case _:
            raise ValueError(f"Unknown algorithm {algorithm}")

    record.cost, record.object_cost, record.txn_cost = cost.total, cost.object_cost, cost.txn_cost
    if c_star is not None:
        record.ratio = _ratio(cost.total, c_star)
        if cost.total < c_star - EPS:
            violations.append(f"cost {cost.total:g} is below the optimum {c_star:g}")
        bounds_apply = sc.config.prune_factor == DEFAULT_PRUNE_FACTOR or algorithm == Algorithm.DIRECT
        if bounds_apply and record.rhs is not None and cost.total > record.rhs + EPS:
            violations.append(f"cost {cost.total:g} exceeds the bound {record.rhs:g}")

    record.violations = "; ".join(violations)
    record.runtime_s = time.perf_counter() - started
    if violations:
        logger.warning(f"{sc.scenario_id} {algorithm.value}/{tour.value}: {record.violations}")
    return record


def _ratio(cost: float, c_star: float) -> Optional[float]:
    if c_star > 0:
        return cost / c_star
    return 1.0 if cost <= EPS else None


def _fill_messages(record: RunRecord, run: DistributedRun, cost: CostBreakdown) -> None:
    record.message_cost = run.c_prime
    record.message_cost_p1 = run.phase_cost(1)
    record.message_cost_p2 = run.phase_cost(2)
    record.message_cost_p3 = run.phase_cost(3)
    record.phase1_bound_ok = run.phase_cost(1) < 2 * cost.total and run.c_prime < 3 * cost.total


def _error_record(sc: Scenario, algorithm: Algorithm, tour: TourKind, error: Exception) -> RunRecord:
    return RunRecord(
        scenario_id=sc.scenario_id,
        algorithm=algorithm.value,
        tour=tour.value,
        n=sc.n,
        transactions=len(sc.transactions),
        k=sc.k,
        alpha=sc.cost.alpha,
        beta=sc.cost.beta,
        error=f"{type(error).__name__}: {error}",
    )


def scenario_records(
    sc: Scenario,
    algorithms: Sequence[Algorithm],
    tours: Sequence[TourKind],
    with_oracle: bool = True,
    strict: bool = False,
) -> list[RunRecord]:
    try:
        ctx = prepare(sc, with_oracle)
    except SchedulingError as e:
        logger.error(f"Cannot prepare {sc.scenario_id}: {e}")
        if strict:
            raise
        return [_error_record(sc, a, t, e) for a in algorithms for t in tours if applicable(sc, a)]

    records: list[RunRecord] = []
    for algorithm in algorithms:
        if not applicable(sc, algorithm):
            logger.debug(f"Skipping {algorithm.value} for {sc.scenario_id}: needs a single object")
            continue
        for tour in tours:
            try:
                records.append(run_algorithm(ctx, algorithm, tour))
            except SchedulingError as e:
                logger.error(f"{sc.scenario_id} {algorithm.value}/{tour.value} failed: {e}")
                if strict:
                    raise
                records.append(_error_record(sc, algorithm, tour, e))
    return records


def _scenario_records_job(args: tuple) -> list[RunRecord]:
    return scenario_records(*args)


def run_experiment(
    scenarios: Iterable[Scenario],
    algorithms: Sequence[Algorithm],
    tours: Optional[Sequence[TourKind]] = None,
    with_oracle: bool = True,
    strict: bool = False,
    workers: int = 1,
    run_id: str = "",
) -> list[RunRecord]:
    """One record per applicable (scenario, algorithm, tour), in input order whatever the worker count.

    Without explicit tours each scenario runs with the tour named in its own config.
    """
    jobs = [(sc, tuple(algorithms), tuple(tours or (sc.config.tour,)), with_oracle, strict) for sc in scenarios]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_scenario_records_job, jobs))
    else:
        batches = [_scenario_records_job(job) for job in jobs]

    records = [r for batch in batches for r in batch]
    for r in records:
        r.run_id = run_id
    failing = sum(1 for r in records if r.violations)
    logger.info(f"Experiment finished: {len(records)} records from {len(jobs)} scenarios, {failing} with violations")
    return records


def typed_frame(rows: Sequence[dict], schema: dict[str, pl.DataType]) -> pl.DataFrame:
    return pl.DataFrame(list(rows), schema=schema)


def frame_csv(frame: pl.DataFrame) -> str:
    return frame.write_csv(None, float_precision=FLOAT_PRECISION)


def records_frame(records: Sequence[RunRecord], timings: bool = False) -> pl.DataFrame:
    schema = dict(CSV_SCHEMA)
    if timings:
        schema[TIMING_COLUMN] = pl.Float64()
    return typed_frame([{column: getattr(r, column) for column in schema} for r in records], schema)


def write_csv(records: Sequence[RunRecord], path: Optional[Path] = None, timings: bool = False) -> str:
    """CSV text with fixed float precision; also written to `path` when given."""
    text = frame_csv(records_frame(records, timings))
    if path is not None:
        Path(path).write_text(text)
    return text


def summarize(records: Sequence[RunRecord]) -> pl.DataFrame:
    """Per (algorithm, tour): record count, median and max C/C*, violation and error counts."""
    frame = records_frame(records)
    return (
        frame.group_by(["algorithm", "tour"])
        .agg(
            pl.len().alias("records"),
            pl.col("ratio").median().alias("median_ratio"),
            pl.col("ratio").max().alias("max_ratio"),
            (pl.col("violations") != "").sum().alias("violations"),
            (pl.col("error") != "").sum().alias("errors"),
        )
        .sort(["algorithm", "tour"])
    )


def universal_quality(
    h: PartitionHierarchy, samples: int = 100, seed: int = 0, max_subset: int = 9
) -> UniversalQuality:
    """Induced universal tour length over the optimal tour length on random node subsets."""
    d = h.metric
    universal = universal_order(h)
    rng = np.random.default_rng(seed)
    kappas: list[float] = []
    if d.n >= 2:
        for _ in range(samples):
            size = int(rng.integers(2, min(max_subset, d.n) + 1))
            subset = [int(v) for v in rng.choice(d.n, size=size, replace=False)]
            anchor = subset[0]
            _, best = exact_tour(d, subset, anchor)
            if best == 0:
                continue
            kappas.append(tour_length(d, induced_tour(universal, subset, anchor)) / best)

    report = UniversalQuality(
        samples=len(kappas),
        kappa_max=max(kappas, default=1.0),
        kappa_median=statistics.median(kappas) if kappas else 1.0,
    )
    logger.info(
        f"Universal tour quality over {report.samples} subsets: "
        f"max={report.kappa_max:.3f} median={report.kappa_median:.3f}"
    )
    return report


def partition_reports(h: PartitionHierarchy) -> list[PartitionReport]:
    return [verify_partition(h.metric, h.level(l)) for l in sorted(h.levels)]


TRACE_SCHEMA: dict[str, pl.DataType] = {
    "scenario_id": pl.Utf8(),
    "phase": pl.Int64(),
    "round": pl.Int64(),
    "src": pl.Int64(),
    "dst": pl.Int64(),
    "kind": pl.Utf8(),
    "payload": pl.Utf8(),
    "cost_class": pl.Utf8(),
    "cost": pl.Float64(),
}


def message_trace(scenarios: Iterable[Scenario], tour: Optional[TourKind] = None) -> pl.DataFrame:
    """Every protocol message of the distributed run of each scenario, in delivery order."""
    rows: list[dict] = []
    for sc in scenarios:
        ctx = prepare(sc, with_oracle=False)
        kind = tour or sc.config.tour
        if sc.is_single_object:
            run = run_distributed_single(sc, ctx.h, kind, ctx.universal)
        else:
            run = run_distributed_multi(sc, ctx.h, kind, ctx.universal)
        rows.extend({"scenario_id": sc.scenario_id, **row} for row in run.log.trace_rows())
    return typed_frame(rows, TRACE_SCHEMA)
