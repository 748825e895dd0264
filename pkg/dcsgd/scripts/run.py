#!/usr/bin/env python

"""
Run every method of an experiment configuration with every seed and write
per-run traces, the checkpoint summary and the per-method table.
"""

import sys
import argparse
from typing import List

from dcsgd.defaults import EXIT_OK, EXIT_DIVERGED
from dcsgd.harness import run_experiment
from dcsgd.scripts import cli_config, add_common_arguments, config_from_args


def main(cli: List[str] = None) -> int:
    parser = get_args()
    args = parser.parse_args(cli)

    config = config_from_args(args)
    result = run_experiment(config, parallel=not args.serial)
    print(result.methods.to_string(index=False))
    return EXIT_DIVERGED if result.unexpected_divergences else EXIT_OK


def get_args() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(**cli_config["subcommands"]["run"])  # type: ignore[index]
    add_common_arguments(parser)
    parser.add_argument(
        "--serial", dest="serial", action="store_true", help="Do not run seeds in parallel."
    )
    return parser


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(1)
