"""
cli.py
------
Command-line entry point for the rigidity lab.

    python src/cli.py <curvature|bochner|lemma|flow|prescribe> --config PATH [--out DIR]
                      [--seed N] [--tol-scale F] [--log-level LEVEL]

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error, 3 engine error
(a partial report is still written).
"""

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from reports.config import ExperimentConfig, load_config
from reports.experiments import RUNNERS, ExperimentOutcome, run_experiment
from reports.writer import RunReport, to_plain, plot_series, write_report
from utils.errors import ConfigError
from utils.logger_config import get_logger, set_console_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_ENGINE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rigidity",
        description="Numerical checks for Bochner-type rigidity of harmonic maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        command = sub.add_parser(name, help=f"run a {name} experiment")
        command.add_argument("--config", required=True, type=Path, help="TOML experiment file")
        command.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        command.add_argument("--seed", type=int, default=None, help="seed (overrides RIGIDITY_SEED and the config)")
        command.add_argument("--tol-scale", type=float, default=None, help="multiply every tolerance by F")
        command.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                             help="console log level (default: WARNING)")
    return parser


def _write_outputs(report: RunReport, outcome: Optional[ExperimentOutcome], config: ExperimentConfig) -> None:
    out_dir = config.output_dir
    write_report(report, out_dir)
    if outcome is None:
        return
    for name, payload in sorted(outcome.artifacts.items()):
        path = out_dir / f"{name}.json"
        path.write_text(json.dumps(to_plain(payload), sort_keys=True) + "\n", encoding="utf-8")
    if config.plots:
        for spec in outcome.plots:
            if spec.table in outcome.tables:
                plot_series(outcome.tables[spec.table], spec.x, spec.y, out_dir / spec.filename,
                            title=spec.title, logx=spec.logx)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_console_level(args.log_level)
    try:
        config = load_config(args.config, seed=args.seed, tol_scale=args.tol_scale,
                             output_dir=str(args.out) if args.out else None, expected_kind=args.command)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    report = RunReport(command=args.command, config=config.echo())
    start = time.perf_counter()
    outcome = None
    try:
        outcome = run_experiment(config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"{args.command} experiment failed: {e}")
        report.status, report.error = "error", f"{type(e).__name__}: {e}"
    finally:
        report.wall_clock_s = time.perf_counter() - start

    if outcome is not None:
        report.checks, report.tables, report.results = outcome.checks, outcome.tables, outcome.results
    report.tolerances = dict(config.tolerances.used)
    _write_outputs(report, outcome, config)

    if report.status == "error":
        print(f"engine error: {report.error}", file=sys.stderr)
        return EXIT_ENGINE
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        print(f"{len(failed)} of {len(report.checks)} checks failed: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    print(f"{len(report.checks)} checks passed; report in {config.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
