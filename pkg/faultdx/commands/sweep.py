import argparse
import logging
from typing import Optional

from faultdx.experiment import (
    ExperimentAborted,
    build_test_set,
    run_experiment,
    sweep_real_count,
    sweep_total_size,
)
from faultdx.models.experiment import ExperimentConfig
from faultdx.models.results import ReportFiles
from faultdx.storage import write_report, write_timings

log = logging.getLogger(__name__)


def int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.replace(" ", "").strip("()").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma separated integers, got {value}")


def register(subparsers, common: argparse.ArgumentParser):
    run = subparsers.add_parser(
        "run", parents=[common], help="Repeated train/evaluate runs at the configured sizes"
    )
    run.set_defaults(handler=run_command)

    total = subparsers.add_parser(
        "sweep-total", parents=[common], help="Accuracy against training pool size"
    )
    total.add_argument("--sizes", type=int_list, help="e.g. 1050,2100 (default: sweep.sizes)")
    total.set_defaults(handler=sweep_total_command)

    real = subparsers.add_parser(
        "sweep-real", parents=[common], help="Accuracy against the number of real baselines"
    )
    real.add_argument("--counts", type=int_list, help="e.g. 0,1,5 (default: sweep.real_counts)")
    real.set_defaults(handler=sweep_real_command)


def _write(report, cfg: ExperimentConfig, name: str) -> ReportFiles:
    table, csv = write_report(report, cfg.paths.reports, name)
    timings = write_timings(report.timings(), cfg.paths.reports, name)
    return ReportFiles(table=table, csv=csv, timings=timings)


def _partial(e: ExperimentAborted, cfg: ExperimentConfig, name: str):
    report = e.sweep if e.sweep is not None else e.report
    files = _write(report, cfg, f"{name} partial")
    log.error(f"Partial results written to {files.table}")


def run_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    try:
        report = run_experiment(cfg, build_test_set(cfg))
    except ExperimentAborted as e:
        _partial(e, cfg, cfg.name)
        raise

    files = _write(report, cfg, cfg.name)
    files.mean_accuracy = report.mean_accuracy
    files.std_accuracy = report.std_accuracy
    print(files.model_dump_json())
    return 0


def _sweep(cfg: ExperimentConfig, name: str, sweep, values: Optional[list[int]]) -> int:
    try:
        table = sweep(cfg, values)
    except ExperimentAborted as e:
        _partial(e, cfg, name)
        raise

    print(_write(table, cfg, name).model_dump_json())
    return 0


def sweep_total_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    sizes = args.sizes if args.sizes is not None else cfg.sweep.sizes
    return _sweep(cfg, f"{cfg.name} total size", sweep_total_size, sizes)


def sweep_real_command(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    counts = args.counts if args.counts is not None else cfg.sweep.real_counts
    return _sweep(cfg, f"{cfg.name} real count", sweep_real_count, counts)
