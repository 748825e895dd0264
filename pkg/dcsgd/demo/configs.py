#!/usr/bin/env python

"""
Ready-made experiment documents.
"""

from typing import Dict, Any, List, Optional

from dcsgd.types import Path
from dcsgd.defaults import DEFAULT_OUTPUT_DIR


def counterexample_comparison(
    T: int = 2000,
    seeds: Optional[List[int]] = None,
    output_dir: Path = DEFAULT_OUTPUT_DIR,
    t: float = 1.0,
) -> Dict[str, Any]:
    """
    Top-1, Top-1 with error feedback and NU Rand-1 on the three-node
    counterexample, all with stepsize 1/L and 34 bits per node and iteration.
    """
    schedule = {"kind": "inverse_smoothness", "scale": 1.0}
    return {
        "name": "counterexample",
        "problem": {"kind": "counterexample", "t": t},
        "methods": [
            {
                "name": "top1",
                "mode": "plain",
                "compressor": {"kind": "top_k", "k": 1},
                "schedule": schedule,
                "expect_divergence": True,
            },
            {
                "name": "top1-ef",
                "mode": "ef",
                "compressor": {"kind": "top_k", "k": 1},
                "schedule": schedule,
            },
            {
                "name": "nu_rand1",
                "mode": "plain",
                "compressor": {"kind": "nu_rand1"},
                "schedule": schedule,
            },
        ],
        "T": T,
        "seeds": list(range(5)) if seeds is None else seeds,
        "output_dir": str(output_dir),
        "target_gap": 1e-6,
    }


def random_quadratic_comparison(
    n: int = 4,
    d: int = 10,
    k: int = 2,
    T: int = 100,
    seeds: Optional[List[int]] = None,
    heterogeneity: float = 0.0,
    sigma2: float = 0.0,
    output_dir: Path = DEFAULT_OUTPUT_DIR,
) -> Dict[str, Any]:
    """
    Rand-K under full and half participation and Top-K with error feedback
    on a random quadratic, with the two-phase schedule.
    """
    return {
        "name": "random_quadratic",
        "problem": {
            "kind": "random_quadratic",
            "n": n,
            "d": d,
            "mu": 1.0,
            "L": 10.0,
            "heterogeneity": heterogeneity,
            "sigma2": sigma2,
            "seed": 0,
        },
        "methods": [
            {"name": "rand_k", "mode": "plain", "compressor": {"kind": "rand_k", "k": k}},
            {
                "name": "rand_k-pp",
                "mode": "pp",
                "compressor": {"kind": "rand_k", "k": k},
                "sampling": {"family": "b_nice", "fraction": 0.5},
            },
            {"name": "top_k-ef", "mode": "ef", "compressor": {"kind": "top_k", "k": k}},
        ],
        "T": T,
        "seeds": list(range(3)) if seeds is None else seeds,
        "output_dir": str(output_dir),
    }


def equal_budget_comparison(
    d: int = 20, k: int = 4, T: int = 200, seeds: Optional[List[int]] = None
) -> Dict[str, Any]:
    """Induced(Top-k/2, Wangni-k/2) against Top-k with error feedback at equal bits."""
    return {
        "name": "equal_budget",
        "problem": {"kind": "random_quadratic", "n": 4, "d": d, "mu": 1.0, "L": 10.0, "seed": 1},
        "methods": [
            {
                "name": "induced",
                "compressor": {"kind": "induced", "k": k, "split": 0.5, "second": "wangni"},
                "schedule": {"kind": "inverse_smoothness", "scale": 0.1},
            },
            {
                "name": "top_k-ef",
                "mode": "ef",
                "compressor": {"kind": "top_k", "k": k},
                "schedule": {"kind": "inverse_smoothness", "scale": 0.1},
            },
        ],
        "T": T,
        "seeds": list(range(3)) if seeds is None else seeds,
    }


CONFIGS = {
    "counterexample": counterexample_comparison,
    "random_quadratic": random_quadratic_comparison,
    "equal_budget": equal_budget_comparison,
}
