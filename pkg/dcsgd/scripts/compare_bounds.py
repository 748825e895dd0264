#!/usr/bin/env python

"""
Tabulate the full-participation, error-feedback and partial-participation
rate bounds of the configured methods over a grid of node counts.
"""

import sys
import argparse
from typing import List

from dcsgd import LOGGER
from dcsgd.harness import compare_bounds, write_bounds
from dcsgd.scripts import cli_config, add_common_arguments, config_from_args


def main(cli: List[str] = None) -> int:
    parser = get_args()
    args = parser.parse_args(cli)

    config = config_from_args(args)
    if args.n_grid is not None:
        config.n_grid = args.n_grid
    path = write_bounds(config)
    print(compare_bounds(config).to_string(index=False))
    LOGGER.info("Wrote bound table to '%s'.", path)
    return 0


def get_args() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(**cli_config["subcommands"]["compare-bounds"])  # type: ignore[index]
    add_common_arguments(parser)
    parser.add_argument("--n-grid", dest="n_grid", type=int, nargs="+", default=None)
    return parser


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(1)
