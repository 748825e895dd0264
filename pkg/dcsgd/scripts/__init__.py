import argparse
from typing import List, Optional

from dcsgd.types import Path, Args

epilog = "Run 'dcsgd <command> --help' for the options of each command."
cli_config = {
    "main": {
        "prog": "dcsgd",
        "description": "Simulator for distributed SGD with compressed communication.",
        "epilog": epilog,
    },
    "subcommands": {
        "certify": {
            "prog": "dcsgd certify",
            "description": "Estimate bias, variance and contraction of compressors.",
            "epilog": epilog,
        },
        "run": {
            "prog": "dcsgd run",
            "description": "Run the methods of an experiment configuration over seeds.",
            "epilog": epilog,
        },
        "compare-bounds": {
            "prog": "dcsgd compare-bounds",
            "description": "Tabulate rate bounds across numbers of nodes.",
            "epilog": epilog,
        },
        "counterexample": {
            "prog": "dcsgd counterexample",
            "description": "Compare Top-1, Top-1 with error feedback and NU Rand-1 on the divergence counterexample.",
            "epilog": epilog,
        },
    },
}


def parse_seeds(value: str) -> List[int]:
    """Comma-separated non-negative integers; an empty string gives no seeds."""
    try:
        seeds = [int(s) for s in value.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Seeds must be comma-separated integers, got '{value}'.")
    if any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("Seeds must be non-negative.")
    return seeds


def add_common_arguments(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    parser.add_argument(
        "--config", dest="config", type=Path, required=config_required, help="Experiment JSON file."
    )
    parser.add_argument("--out", dest="out", type=Path, default=None, help="Output directory.")
    parser.add_argument(
        "--seeds", dest="seeds", type=parse_seeds, default=None, help="Comma-separated seeds."
    )
    parser.add_argument(
        "--trials", dest="trials", type=int, default=None, help="Monte-Carlo trials."
    )


def config_from_args(args: Args, doc: Optional[dict] = None):
    """Load the experiment named by ``--config`` (or ``doc``) and apply the command-line overrides."""
    from dcsgd.config import ExperimentConfig

    if doc is not None:
        if args.seeds is not None:
            doc["seeds"] = args.seeds
        config = ExperimentConfig.from_dict(doc)
    else:
        config = ExperimentConfig.from_json(args.config)
        if args.seeds is not None:
            config.seeds = args.seeds
    if args.out is not None:
        config.output_dir = Path(args.out)
    if args.trials is not None:
        config.trials = args.trials
    return config
