#!/usr/bin/env python

"""
Command-line entry point: dispatches to one script per subcommand.
"""

import sys
import argparse
from typing import List

from dcsgd import LOGGER
from dcsgd.defaults import EXIT_INVALID
from dcsgd.exceptions import ConfigurationError, DCSGDError
from dcsgd.scripts.certify import main as certify
from dcsgd.scripts.run import main as run
from dcsgd.scripts.compare_bounds import main as compare_bounds
from dcsgd.scripts.counterexample import main as counterexample
from dcsgd.scripts import cli_config

COMMANDS = {
    "certify": certify,
    "run": run,
    "compare-bounds": compare_bounds,
    "counterexample": counterexample,
}


def main(cli: List[str] = None) -> int:
    parser = get_args()
    main_args, cmd_args = parser.parse_known_args(cli)

    try:
        return COMMANDS[main_args.command](cmd_args)
    except ConfigurationError as e:
        for problem in e.problems:
            LOGGER.error("Invalid configuration: %s", problem)
    except (DCSGDError, OSError) as e:
        LOGGER.error("%s", e)
    except KeyboardInterrupt:
        return 1
    return EXIT_INVALID


def get_args() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(**cli_config["main"])  # type: ignore[index]

    subparsers = parser.add_subparsers(dest="command", required=True)

    for cmd in cli_config["subcommands"]:
        subparsers.add_parser(cmd, add_help=False)
    return parser


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(1)
