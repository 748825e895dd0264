#!/usr/bin/env python

"""
Certify compressors on the fixed panel of test vectors and write a CSV
report with bias z-scores, variance and contraction estimates.
"""

import sys
import argparse
from typing import List

import pandas as pd

from dcsgd import LOGGER
from dcsgd.data_models.spec import CompressorSpec
from dcsgd.defaults import CERTIFICATION_FILE, DEFAULT_OUTPUT_DIR, DEFAULT_TRIALS
from dcsgd.harness import certification_report
from dcsgd.scripts import cli_config, add_common_arguments, config_from_args
from dcsgd.types import Path

DEFAULT_DIM = 10


def default_specs(d: int) -> List[CompressorSpec]:
    k = max(1, d // 5)
    specs = [
        CompressorSpec.identity(),
        CompressorSpec.top_k(k),
        CompressorSpec.rand_k(k),
        CompressorSpec.nu_rand1(),
        CompressorSpec.wangni(k),
        CompressorSpec.ternary(),
    ]
    if d >= 2:
        specs.append(CompressorSpec.induced(CompressorSpec.top_k(1), CompressorSpec.rand_k(1)))
    return specs


def main(cli: List[str] = None) -> int:
    parser = get_args()
    args = parser.parse_args(cli)

    if args.config is not None:
        config = config_from_args(args)
        specs = list(dict.fromkeys(m.compressor for m in config.methods))
        d, trials, output_dir = config.certify_dim, config.trials, config.output_dir
    else:
        d = args.dim
        specs = default_specs(d)
        trials = args.trials or DEFAULT_TRIALS
        output_dir = args.out or DEFAULT_OUTPUT_DIR

    LOGGER.info("Certifying %d compressors at d=%d with %d trials.", len(specs), d, trials)
    report = certification_report(specs, d, trials, args.seed)
    output_dir = Path(output_dir)
    output_dir.mkdir()
    path = output_dir / CERTIFICATION_FILE
    try:
        report.to_csv(path, index=False)
    except OSError as e:
        raise OSError(f"Could not write '{path}': {e}") from e
    with pd.option_context("display.width", 200, "display.max_columns", None):
        print(report[["compressor", "max_bias_z", "delta_hat", "contraction_hat", "classification"]])
    LOGGER.info("Wrote certification report to '%s'.", path)
    return 0


def get_args() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(**cli_config["subcommands"]["certify"])  # type: ignore[index]
    add_common_arguments(parser, config_required=False)
    parser.add_argument("--dim", dest="dim", type=int, default=DEFAULT_DIM)
    parser.add_argument("--seed", dest="seed", type=int, default=0)
    return parser


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(1)
