# src/main.py

import argparse
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from cli import commands
from cli.config import OUTPUT_FORMATS, TABLE_COMMANDS, CliConfig
from graph.dag_model import Estimand
from sem.strategy import Strategy
from storage.report_writer import write_text
from utils.errors import ChangeScoreError, UsageError
from utils.logger import get_logger, set_level
from utils.settings import ENV_VARS, load_settings

load_dotenv()

logger = get_logger("main")


def _add_common(p: argparse.ArgumentParser, *names: str):
    if "scenario" in names:
        p.add_argument("--scenario", help="built-in id (1A ... 3B+) or a scenario JSON file")
    if "dag" in names:
        p.add_argument("--dag", help="DAG file in dagitty-style syntax")
    if "n" in names:
        p.add_argument("--n", type=int, help="sample size per dataset (default 1000)")
    if "reps" in names:
        p.add_argument("--reps", type=int, help="number of replicates (default 10000)")
    if "seed" in names:
        p.add_argument("--seed", type=int, help="master seed, 0 <= seed < 2**64")
    if "workers" in names:
        p.add_argument("--workers", type=int, help="worker processes for replication")
    if "format" in names:
        p.add_argument("--format", choices=OUTPUT_FORMATS)
    if "bindings" in names:
        p.add_argument("--exposure", default="WC0")
        p.add_argument("--baseline", default="IC0")
        p.add_argument("--followup", default="IC1")
    p.add_argument("--out", help="write the output to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changescore",
        description="Change-score, follow-up adjusted and unadjusted analyses on causal scenarios",
    )
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("list-scenarios", help="list the built-in scenarios"))
    _add_common(sub.add_parser("show-dag", help="print a scenario's DAG with coefficients"), "scenario", "dag")
    _add_common(sub.add_parser("export-scenario", help="write a scenario as JSON"), "scenario")

    p = sub.add_parser("simulate", help="draw one dataset as CSV")
    _add_common(p, "scenario", "n", "seed")
    p.add_argument("--include-latent", action="store_true", help="also write latent columns")

    p = sub.add_parser("analyze", help="fit one analysis to a CSV dataset")
    _add_common(p, "bindings")
    p.add_argument("--data", required=True)
    p.add_argument("--strategy", choices=commands.STRATEGY_CHOICES, default="change-score")
    p.add_argument("--standardized", action="store_true", help="also report the coefficient in sd units")

    _add_common(sub.add_parser("oracle", help="expected coefficients in the population"), "scenario", "format")

    p = sub.add_parser("replicate", help="Monte Carlo summary for one scenario")
    _add_common(p, "scenario", "n", "reps", "seed", "workers", "format")
    p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy])
    p.add_argument("--estimates-out", help="tidy CSV of every replicate's estimates")

    p = sub.add_parser("table1", help="reproduce the full results table")
    _add_common(p, "n", "reps", "seed", "workers", "format")
    p.add_argument("--scenarios", nargs="+", help="subset of built-in ids")

    p = sub.add_parser("dsep", help="test a d-separation statement")
    _add_common(p, "scenario", "dag")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--given", action="append", default=[])

    p = sub.add_parser("classify", help="role of the baseline outcome and the recommended analysis")
    _add_common(p, "scenario", "dag", "bindings")
    p.add_argument("--estimand", choices=[e.value for e in Estimand], default=Estimand.TotalEffect.value)

    p = sub.add_parser("oldham", help="correlation of unrelated measurements with their difference")
    _add_common(p, "n", "seed")
    return parser


def _require_scenario(args) -> str:
    if not args.scenario:
        raise UsageError("--scenario is required")
    return args.scenario


def dispatch(args, config: CliConfig) -> str:
    c = args.command
    if c == "list-scenarios":
        return commands.cmd_list_scenarios(rich_output=sys.stdout.isatty() and not config.out)
    if c == "show-dag":
        return commands.cmd_show_dag(scenario=args.scenario, dag_path=args.dag)
    if c == "export-scenario":
        return commands.cmd_export_scenario(_require_scenario(args))
    if c == "simulate":
        return commands.cmd_simulate(_require_scenario(args), config.n, config.seed, config.include_latent)
    if c == "analyze":
        return commands.cmd_analyze(
            args.data, args.strategy, args.exposure, args.baseline, args.followup, standardized=args.standardized
        )
    if c == "oracle":
        return commands.cmd_oracle(_require_scenario(args), config.output_format)
    if c == "replicate":
        return commands.cmd_replicate(
            _require_scenario(args),
            args.strategy or (),
            reps=config.reps if args.reps is not None else None,
            n=config.n if args.n is not None else None,
            seed=config.seed,
            workers=config.workers,
            fmt=config.output_format,
            out=config.out,
            estimates_out=config.estimates_out,
        )
    if c == "table1":
        return commands.cmd_table1(
            reps=config.reps,
            n=config.n,
            seed=config.seed,
            workers=config.workers,
            fmt=config.output_format,
            out=config.out,
            scenarios=config.scenarios,
        )
    if c == "dsep":
        return commands.cmd_dsep(args.x, args.y, args.given, dag_path=args.dag, scenario=args.scenario)
    if c == "classify":
        return commands.cmd_classify(
            args.exposure, args.baseline, args.followup, args.estimand, dag_path=args.dag, scenario=args.scenario
        )
    if c == "oldham":
        n = args.n if args.n is not None else 100000
        return commands.cmd_oldham(n, config.seed)
    raise UsageError(f"Unknown command {c}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings()
    except ValidationError as e:
        first = e.errors()[0]
        print(f"Error: {ENV_VARS[first['loc'][0]]}: {first['msg']}", file=sys.stderr)
        return 2
    set_level(args.log_level or settings.log_level)

    try:
        config = CliConfig.from_args(args, settings)
    except ValidationError as e:
        first = e.errors()[0]
        print(f"Error: --{first['loc'][0]}: {first['msg']}", file=sys.stderr)
        return 2

    try:
        text = dispatch(args, config)
    except ChangeScoreError as e:
        print(f"Error: {e}", file=sys.stderr)
        logger.debug("detail: %s", e.detail)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"Error: {e}", file=sys.stderr)
        return 1

    # replicate and table1 write their own report files
    if config.out and args.command in TABLE_COMMANDS:
        return 0
    if config.out:
        write_text(text, config.out)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
