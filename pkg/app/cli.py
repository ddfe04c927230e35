"""Command line entry point: generate scenarios, run the schedulers, compare against the oracle."""

import argparse
import logging
import sys
import uuid
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import polars as pl

from app.corpus import corpus, graph_corpus
from app.errors import ParseError, SchedulingError, ValidationError
from app.harness import (
    compute_oracle,
    frame_csv,
    message_trace,
    partition_reports,
    run_experiment,
    summarize,
    typed_frame,
    universal_quality,
    write_csv,
)
from app.hierarchy import build_hierarchy, dump_hierarchy
from app.metric_graph import WeightedGraph, all_pairs_distances
from app.models import Algorithm, TourKind
from app.oracle import witness_schedule
from app.run_record_service import (
    delete_run,
    get_all_run_records,
    get_run_records_by_run,
    get_run_records_by_scenario,
    get_run_records_count,
    save_run_records,
)
from app.scenario_io import parse_scenario, save_scenario
from app.sched_core import Scenario, schedule_cost

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2

SCENARIO_SUFFIXES = (".yaml", ".yml")
ORACLE_SCHEMA = {"scenario_id": pl.Utf8(), "n": pl.Int64(), "c_star": pl.Float64(), "walk": pl.Utf8()}


class UsageError(Exception):
    pass


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    logger.info(f"Wrote {out}")


def _scenario_paths(entries: Sequence[Path]) -> list[Path]:
    paths: list[Path] = []
    for entry in entries:
        if entry.is_dir():
            paths.extend(sorted(p for p in entry.iterdir() if p.suffix in SCENARIO_SUFFIXES))
        elif entry.exists():
            paths.append(entry)
        else:
            raise UsageError(f"No such scenario file or directory: {entry}")
    if not paths:
        raise UsageError("No scenario files found")
    return paths


def _load_scenarios(args: argparse.Namespace) -> list[Scenario]:
    if args.scenario:
        return [parse_scenario(p) for p in _scenario_paths(args.scenario)]
    return corpus(
        args.seed,
        args.count,
        max_nodes=args.max_nodes,
        max_txns=args.max_txns,
        max_k=args.max_k,
        prune_factor=args.prune_factor,
    )


def _algorithms(args: argparse.Namespace) -> list[Algorithm]:
    return [Algorithm(a) for a in args.algorithm] if args.algorithm else list(Algorithm)


def _tours(args: argparse.Namespace) -> Optional[list[TourKind]]:
    return [TourKind(t) for t in args.tour] if args.tour else None


def cmd_gen(args: argparse.Namespace) -> int:
    if args.out is None:
        raise UsageError("gen needs --out DIR")
    scenarios = corpus(
        args.seed,
        args.count,
        max_nodes=args.max_nodes,
        max_txns=args.max_txns,
        max_k=args.max_k,
        prune_factor=args.prune_factor,
    )
    written = [save_scenario(sc, args.out / f"{sc.scenario_id}.yaml") for sc in scenarios]
    sys.stdout.write("".join(f"{p}\n" for p in written))
    return EXIT_OK


def _experiment(args: argparse.Namespace):
    scenarios = _load_scenarios(args)
    records = run_experiment(
        scenarios,
        _algorithms(args),
        _tours(args),
        with_oracle=not args.no_oracle,
        strict=args.strict,
        workers=args.workers,
        run_id=args.run_id or uuid.uuid4().hex[:12],
    )
    if args.trace_messages is not None:
        trace = message_trace(scenarios, _tours(args)[0] if args.tour else None)
        _emit(frame_csv(trace), args.trace_messages)
    if args.db:
        save_run_records(records)
    return records


def _exit_code(records) -> int:
    failing = [r for r in records if r.violations]
    if failing:
        logger.error(f"{len(failing)} of {len(records)} records violate an invariant")
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    records = _experiment(args)
    _emit(write_csv(records, timings=args.timings), args.out)
    return _exit_code(records)


def cmd_compare(args: argparse.Namespace) -> int:
    records = _experiment(args)
    _emit(frame_csv(summarize(records)), args.out)
    if args.kappa_samples > 0:
        for sc in _load_scenarios(args):
            universal_quality(build_hierarchy(sc.dist, sc.config.sigma), args.kappa_samples, args.seed)
    return _exit_code(records)


def cmd_oracle(args: argparse.Namespace) -> int:
    rows = []
    status = EXIT_OK
    for sc in _load_scenarios(args):
        result = compute_oracle(sc)
        if result is None:
            logger.warning(f"{sc.scenario_id} is too large for the oracle")
            rows.append({"scenario_id": sc.scenario_id, "n": sc.n, "c_star": None, "walk": ""})
            continue
        witness = schedule_cost(sc, witness_schedule(sc, result)).total
        if abs(witness - result.c_star) > 1e-9:
            logger.error(f"{sc.scenario_id}: witness schedule costs {witness}, oracle reports {result.c_star}")
            status = EXIT_INVARIANT
        walk = " ".join(str(v) for v in result.walk)
        rows.append({"scenario_id": sc.scenario_id, "n": sc.n, "c_star": result.c_star, "walk": walk})
    _emit(frame_csv(typed_frame(rows, ORACLE_SCHEMA)), args.out)
    return status


def _graphs(args: argparse.Namespace) -> list[tuple[str, WeightedGraph, float]]:
    if args.scenario:
        return [(sc.scenario_id, sc.graph, sc.config.sigma) for sc in _load_scenarios(args)]
    return [(f"g{args.seed}-{i:03d}", g, 2.0) for i, g in enumerate(graph_corpus(args.seed, args.count))]


def cmd_verify_partition(args: argparse.Namespace) -> int:
    rows = []
    status = EXIT_OK
    for graph_id, graph, sigma in _graphs(args):
        h = build_hierarchy(all_pairs_distances(graph), sigma)
        for report in partition_reports(h):
            ok = report.exact_cover and (report.level < 0 or report.max_diameter <= sigma * report.radius)
            if not ok:
                status = EXIT_INVARIANT
            rows.append({"graph": graph_id, **asdict(report), "ok": ok})
    _emit(frame_csv(pl.DataFrame(rows)), args.out)
    return status


def cmd_dump_hierarchy(args: argparse.Namespace) -> int:
    if not args.scenario:
        raise UsageError("dump-hierarchy needs --scenario")
    lines = []
    for sc in _load_scenarios(args):
        lines.append(f"# {sc.scenario_id}")
        lines.extend(dump_hierarchy(build_hierarchy(sc.dist, sc.config.sigma)))
    _emit("".join(f"{line}\n" for line in lines), args.out)
    return EXIT_OK


def cmd_history(args: argparse.Namespace) -> int:
    if args.delete_run:
        deleted = delete_run(args.delete_run)
        _emit(f"{deleted}\n", args.out)
        return EXIT_OK
    if args.count:
        _emit(f"{get_run_records_count()}\n", args.out)
        return EXIT_OK

    if args.scenario_id:
        records = get_run_records_by_scenario(args.scenario_id)
        if args.run_id:
            records = [r for r in records if r.run_id == args.run_id]
    elif args.run_id:
        records = get_run_records_by_run(args.run_id)
    else:
        records = get_all_run_records()
    _emit(write_csv(records, timings=args.timings), args.out)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "compare": cmd_compare,
    "oracle": cmd_oracle,
    "verify-partition": cmd_verify_partition,
    "dump-hierarchy": cmd_dump_hierarchy,
    "history": cmd_history,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, nargs="+", help="scenario files or directories of them")
    common.add_argument("--seed", type=int, default=0, help="corpus seed when no --scenario is given")
    common.add_argument("--count", type=int, default=10)
    common.add_argument("--max-nodes", type=int, default=10)
    common.add_argument("--max-txns", type=int, default=6)
    common.add_argument("--max-k", type=int, default=1)
    common.add_argument("--prune-factor", type=float, default=8.0)
    common.add_argument("--out", type=Path, help="output file (directory for gen); stdout otherwise")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--algorithm", action="append", choices=[a.value for a in Algorithm])
    runs.add_argument("--tour", action="append", choices=[TourKind.MST.value, TourKind.UNIVERSAL.value])
    runs.add_argument("--strict", action="store_true", help="abort on the first module error")
    runs.add_argument("--trace-messages", type=Path, metavar="PATH", help="write the protocol message trace CSV")
    runs.add_argument("--db", action="store_true", help="store the records in APP_DATABASE_URL")
    runs.add_argument("--run-id", default="")
    runs.add_argument("--timings", action="store_true", help="add the runtime_s column")
    runs.add_argument("--workers", type=int, default=1)
    runs.add_argument("--no-oracle", action="store_true")

    parser = argparse.ArgumentParser(prog="dualflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write a scenario corpus as files")
    sub.add_parser("run", parents=[common, runs], help="run schedulers and emit one CSV row per run")
    compare = sub.add_parser("compare", parents=[common, runs], help="per-algorithm summary against the oracle")
    compare.add_argument("--kappa-samples", type=int, default=0, help="also log universal tour quality")
    sub.add_parser("oracle", parents=[common], help="optimal cost of each scenario")
    sub.add_parser("verify-partition", parents=[common], help="check every hierarchy level")
    sub.add_parser("dump-hierarchy", parents=[common], help="one line per cluster")
    history = sub.add_parser("history", help="export stored run records")
    history.add_argument("--run-id", default="")
    history.add_argument("--scenario-id", default="")
    action = history.add_mutually_exclusive_group()
    action.add_argument("--count", action="store_true", help="print the number of stored records")
    action.add_argument("--delete-run", default="", metavar="RUN_ID", help="delete every record of one run")
    history.add_argument("--timings", action="store_true")
    history.add_argument("--out", type=Path)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except SchedulingError as e:
        logger.error(f"{args.command} aborted: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INVARIANT
