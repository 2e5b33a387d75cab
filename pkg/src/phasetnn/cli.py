"""Command line entry point ``phasetnn``."""
import argparse
import sys

import logbook
import numpy as np

from .base import ConfigError, NumericalError, logger
from .config import KINDS, load_config, load_presets, read_config_data
from .harness import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_run_arguments(parser):
    parser.add_argument("--config", metavar="PATH", help="JSON experiment config.")
    parser.add_argument("--preset", metavar="NAME", help="Shipped preset to start from.")
    parser.add_argument("--seed", type=int, help="Override the random seed.")
    parser.add_argument(
        "--workers", type=int, help="Worker threads (default: PHASETNN_NUM_THREADS)."
    )
    parser.add_argument(
        "--out", default=".", metavar="DIR", help="Output directory (default: .)."
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phasetnn",
        description="Phase-shift transferable network benchmarks.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log per-band detail."
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        _add_run_arguments(commands.add_parser(kind, help=f"Run a {kind} experiment."))
    listing = commands.add_parser("list-presets", help="List shipped presets.")
    listing.add_argument("--kind", choices=KINDS, help="Only presets of this kind.")
    return parser


def _list_presets(kind):
    for name, fields in sorted(load_presets().items()):
        if kind is None or fields.get("kind") == kind:
            print(f"{name}\t{fields.get('kind')}\t{fields.get('problem')}")


def _run(args):
    if args.config is None and args.preset is None:
        raise ConfigError("pass --config, --preset or both")
    declared = read_config_data(args.config, args.preset).get("kind", args.command)
    if declared != args.command:
        raise ConfigError(
            f"config is a {declared!r} experiment, not {args.command!r}"
        )
    config = load_config(
        args.config,
        args.preset,
        kind=args.command,
        seed=args.seed,
        workers=args.workers,
    )
    report = run_experiment(config, out_dir=args.out)
    print(f"relative_l2 = {report.relative_l2:.6e}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logbook.DEBUG if args.verbose else logbook.INFO
    with logbook.StreamHandler(sys.stderr, level=level, bubble=False).applicationbound():
        try:
            if args.command == "list-presets":
                _list_presets(args.kind)
            else:
                _run(args)
        except ConfigError as exc:
            logger.error("configuration error: {}", exc)
            return EXIT_CONFIG
        except NumericalError as exc:
            logger.error("numerical failure: {}", exc)
            return EXIT_NUMERICAL
        except (np.linalg.LinAlgError, ArithmeticError) as exc:
            logger.error("numerical failure: {}: {}", type(exc).__name__, exc)
            return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
