"""
src/scenarios/cli.py
--------------------

Command-line entry point:

    python -m src.scenarios <subcommand> --config PATH [--out DIR] [--seed N]
                            [--threads N] [--tol-override KEY=VAL ...]

Exit codes:
    0  success
    1  a hard invariant failed, or an operation precondition was violated
    2  usage or config error
    3  numerical failure (integration, shooting, non-finite values, CFL)
"""

import argparse
import logging

from src.errors import (
    CflViolation,
    ConfigError,
    DomainError,
    GeometricDependenceError,
    IntegrationError,
    PreconditionError,
    ShootingError,
)
from src.scenarios.config import load_config, load_environment
from src.scenarios.tasks import run_scenario

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_PRECONDITION = 1

SUBCOMMANDS = {
    "value": "value-map",
    "classify": "classify-map",
    "trace-char": "trace-char",
    "conjugate-scan": "conjugate-scan",
    "trace-singular": "trace-singular",
    "oracle": "oracle",
    "report": "report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjsing", description="Contact Hamilton-Jacobi singularity scenarios")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, task in SUBCOMMANDS.items():
        cmd = sub.add_parser(name, help=f"run a {task} scenario")
        cmd.add_argument("--config", required=True, help="scenario config (JSON)")
        cmd.add_argument("--out", help="output directory (overrides the config)")
        cmd.add_argument("--seed", type=int, help="random seed (overrides the config)")
        cmd.add_argument("--threads", type=int, help="joblib workers (overrides the config)")
        cmd.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL",
                         help="override one tolerance; repeatable")
    return parser


def resolve(args, environment: dict = None) -> dict:
    """Load the config and apply the command-line overrides."""
    config = load_config(args.config, args.tol_override, environment, SUBCOMMANDS[args.command])
    if args.out:
        config["output_dir"] = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"⛔ --seed must be non-negative, got {args.seed}", field="--seed")
        config["seed"] = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"⛔ --threads must be positive, got {args.threads}", field="--threads")
        config["threads"] = args.threads
    return config


def main(argv=None) -> int:
    environment = load_environment()
    logging.basicConfig(level=getattr(logging, environment["log_level"], logging.INFO),
                        format="%(asctime)s [%(levelname)s] %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    try:
        config = resolve(args, environment)
        manifest = run_scenario(config)
    except ConfigError as e:
        where = f" (field {e.field})" if e.field else f" (line {e.line})" if e.line else ""
        logger.error(f"❌ config error{where}: {e}")
        return EXIT_USAGE
    except (PreconditionError, GeometricDependenceError) as e:
        hypothesis = getattr(e, "hypothesis", None)
        logger.error(f"❌ precondition failed{f' [{hypothesis}]' if hypothesis else ''}: {e}")
        return EXIT_PRECONDITION
    except (IntegrationError, ShootingError, DomainError, CflViolation) as e:
        logger.error(f"❌ numerical failure ({type(e).__name__}): {e}")
        return EXIT_NUMERICAL
    return manifest["exit_status"]
