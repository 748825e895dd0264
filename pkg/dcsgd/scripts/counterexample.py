#!/usr/bin/env python

"""
Run the built-in comparison on the three-node counterexample: Top-1 (which
diverges), Top-1 with error feedback and NU Rand-1 at equal bits per iteration.
"""

import sys
import argparse
from typing import List

from dcsgd.defaults import DEFAULT_OUTPUT_DIR, EXIT_OK, EXIT_DIVERGED
from dcsgd.demo import counterexample_comparison
from dcsgd.harness import run_experiment
from dcsgd.scripts import cli_config, add_common_arguments, config_from_args


def main(cli: List[str] = None) -> int:
    parser = get_args()
    args = parser.parse_args(cli)

    doc = counterexample_comparison(T=args.iterations, t=args.t, output_dir=args.out or DEFAULT_OUTPUT_DIR)
    config = config_from_args(args, doc=doc)
    result = run_experiment(config, parallel=not args.serial)
    print(result.methods.to_string(index=False))
    return EXIT_DIVERGED if result.unexpected_divergences else EXIT_OK


def get_args() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(**cli_config["subcommands"]["counterexample"])  # type: ignore[index]
    add_common_arguments(parser, config_required=False)
    parser.add_argument("-T", "--iterations", dest="iterations", type=int, default=2000)
    parser.add_argument("-t", dest="t", type=float, default=1.0, help="Start at (t, t, t).")
    parser.add_argument("--serial", dest="serial", action="store_true")
    return parser


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(1)
