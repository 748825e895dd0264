#! /usr/bin/env python

"""
Experiment driver: compressor certification, batch runs over seeds with CSV
output, and tables of the rate bounds across numbers of nodes.
"""

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import parmap
from tqdm import tqdm

from dcsgd import LOGGER, MEMORY
from dcsgd.compressors import compress, decompress, nominal_bit_cost, nominal_delta
from dcsgd.config import ExperimentConfig, MethodConfig, effective_delta
from dcsgd.data_models.run import Mode, RunRecord
from dcsgd.data_models.sampling import SamplingFamily, SamplingScheme
from dcsgd.data_models.spec import CompressorKind, CompressorSpec
from dcsgd.defaults import (
    BOUNDS_FILE,
    CERTIFICATION_TOLERANCE,
    DEFAULT_TRIALS,
    METHODS_FILE,
    MIN_CERTIFICATION_TRIALS,
    RESOLVED_CONFIG_FILE,
    SUMMARY_FILE,
    Z_SCORE_THRESHOLD,
)
from dcsgd.exceptions import ConfigurationError, ParameterError
from dcsgd.optimizer import run, theorem_bound
from dcsgd.sampling import expected_cardinality, pp_variance_parameters, default_eso_vector
from dcsgd.types import Array, DataFrame, Path, Series
from dcsgd.utils import counter_stream, standard_error

# coordinates seen non-zero fewer times than this are left out of the bias test
MIN_OBSERVATIONS = 30
# relative standard error below which a coordinate counts as constant
CONSTANT_RTOL = 1e-12
PANEL = ["e_first", "e_last", "ones", "heavy_tailed", "near_sparse"]
SUMMARY_COLUMNS = ["method", "k", "f_gap_mean", "f_gap_se", "bits_mean", "n_runs"]
METHODS_COLUMNS = [
    "method",
    "compressor",
    "mode",
    "n_runs",
    "diverged",
    "bits_total_mean",
    "bits_per_iteration",
    "iterations_to_target_mean",
    "converged_runs",
    "output_gap_mean",
    "output_gap_se",
    "theorem_bound",
]
BOUNDS_COLUMNS = [
    "method",
    "compressor",
    "n",
    "delta",
    "delta_n",
    "bound_full",
    "delta_ef",
    "a_s",
    "delta_s",
    "bound_pp",
]


@MEMORY.cache
def certification_panel(d: int, seed: int = 0) -> Array:
    """
    Fixed test vectors: first and last standard basis vectors, all-ones,
    a heavy-tailed random vector and a near-sparse random vector.
    """
    rng = counter_stream(seed, d)
    first = np.zeros(d)
    first[0] = 1.0
    last = np.zeros(d)
    last[-1] = 1.0
    heavy = rng.choice([-1.0, 1.0], size=d) * (1 + np.abs(rng.standard_t(2, size=d)))
    near_sparse = 0.05 * rng.normal(size=d)
    near_sparse[rng.choice(d, size=max(1, d // 5), replace=False)] = rng.choice([-3.0, 3.0])
    return np.array([first, last, np.ones(d), heavy, near_sparse])


def _bias_z_scores(draws: Array, x: Array) -> Array:
    """
    Per-coordinate |mean - x| / standard error. Coordinates seen non-zero
    fewer than MIN_OBSERVATIONS times are skipped (0). Constant coordinates,
    whose standard error is within rounding of zero, score 0 when equal to x
    and inf otherwise.
    """
    trials = draws.shape[0]
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(trials)
    error = np.abs(mean - x)
    observed = (draws != 0).sum(axis=0)
    tolerance = CERTIFICATION_TOLERANCE * max(1.0, float(np.abs(x).max()))
    z = np.zeros(x.size)
    testable = observed >= MIN_OBSERVATIONS
    constant = testable & (se <= CONSTANT_RTOL * np.maximum(1.0, np.abs(x)))
    z[constant & (error > tolerance)] = np.inf
    varying = testable & ~constant
    z[varying] = error[varying] / se[varying]
    return z


def certify_compressor(
    spec: CompressorSpec, d: int, trials: int = DEFAULT_TRIALS, seed: int = 0
) -> Series:
    """
    Monte-Carlo certificate of ``spec`` on the fixed panel of test vectors.

    Reports the largest componentwise bias z-score, the largest ratio
    E||C(x)||^2 / ||x||^2 (``delta_hat``), the largest ratio
    E||C(x) - x||^2 / ||x||^2 (``contraction_hat``) and the same for the
    operator scaled by 1/delta (``scaled_contraction``), each with the
    standard error of the panel vector attaining it. Deterministic operators
    are evaluated once.
    """
    if trials < MIN_CERTIFICATION_TRIALS:
        raise ParameterError(f"Certification needs at least {MIN_CERTIFICATION_TRIALS} trials, got {trials}.")
    spec.check_dim(d)
    deterministic = spec.kind in (CompressorKind.IDENTITY, CompressorKind.TOP_K)
    delta = nominal_delta(spec, d)
    scale = 1.0 if deterministic else 1.0 / delta
    panel = certification_panel(d, seed)

    z_max = 0.0
    stats: Dict[str, List[Tuple[float, float]]] = {"delta": [], "contraction": [], "scaled": []}
    for j, x in enumerate(panel):
        norm2 = float(x @ x)
        if deterministic:
            draws = decompress(compress(spec, x))[np.newaxis, :]
            error = float(np.abs(draws[0] - x).max())
            z = 0.0 if error <= CERTIFICATION_TOLERANCE * max(1.0, float(np.abs(x).max())) else np.inf
        else:
            rng = counter_stream(seed, d, j)
            draws = np.array([decompress(compress(spec, x, rng)) for _ in range(trials)])
            z = float(_bias_z_scores(draws, x).max())
        z_max = max(z_max, z)
        for key, values in [
            ("delta", (draws ** 2).sum(axis=1)),
            ("contraction", ((draws - x) ** 2).sum(axis=1)),
            ("scaled", ((scale * draws - x) ** 2).sum(axis=1)),
        ]:
            stats[key].append((values.mean() / norm2, float(standard_error(values)) / norm2))

    def largest(key: str) -> Tuple[float, float]:
        return max(stats[key], key=lambda pair: pair[0])

    delta_hat, delta_se = largest("delta")
    contraction_hat, contraction_se = largest("contraction")
    scaled, scaled_se = largest("scaled")
    unbiased = z_max <= Z_SCORE_THRESHOLD
    contractive = contraction_hat <= 1 - 1 / delta + CERTIFICATION_TOLERANCE
    if unbiased:
        classification = "unbiased"
    elif contractive:
        classification = "biased-contractive"
    else:
        classification = "biased"
    return pd.Series(
        {
            "compressor": spec.label,
            "kind": spec.kind.value,
            "d": d,
            "max_bias_z": z_max,
            "delta_hat": delta_hat,
            "delta_se": delta_se,
            "delta_nominal": delta,
            "contraction_hat": contraction_hat,
            "contraction_se": contraction_se,
            "scaled_contraction": scaled,
            "scaled_contraction_se": scaled_se,
            "samples": 1 if deterministic else trials,
            "unbiased": unbiased,
            "contractive": contractive,
            "classification": classification,
        }
    )


def certification_report(
    specs: Sequence[CompressorSpec], d: int, trials: int = DEFAULT_TRIALS, seed: int = 0
) -> DataFrame:
    rows = [certify_compressor(spec, d, trials, seed) for spec in tqdm(specs, desc="certify")]
    return pd.DataFrame(rows).reset_index(drop=True)


@dataclass
class ExperimentResult:
    files: List[Path]
    summary: DataFrame
    methods: DataFrame
    records: List[RunRecord] = field(repr=False, default_factory=list)
    unexpected_divergences: List[Tuple[str, int]] = field(default_factory=list)


def trace_file_name(method: str, seed: int) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", method) + f".seed{seed}.csv"


def _run_job(job: Tuple[MethodConfig, int], config: ExperimentConfig) -> RunRecord:
    method, seed = job
    LOGGER.info("Running '%s' with seed %d.", method.name, seed)
    return run(
        config.instance,
        method.mode,
        method.compressor,
        method.sampling,
        config.schedule_for(method),
        config.T,
        seed,
        label=method.name,
    )


def per_iteration_bits(method: MethodConfig, config: ExperimentConfig) -> float:
    """Expected uplink bits of one iteration: nominal message size times expected senders."""
    senders = (
        expected_cardinality(method.sampling)
        if method.sampling is not None
        else config.instance.n
    )
    return nominal_bit_cost(method.compressor, config.instance.dim) * senders


def _check_bit_budgets(config: ExperimentConfig) -> None:
    budgets = {m.name: per_iteration_bits(m, config) for m in config.methods}
    if len(budgets) > 1 and max(budgets.values()) > 2 * min(budgets.values()):
        LOGGER.warning(
            "Compared methods differ in per-iteration bits: %s.",
            ", ".join(f"{k}={v:g}" for k, v in budgets.items()),
        )


def method_bound(method: MethodConfig, config: ExperimentConfig, T: Optional[int] = None) -> float:
    """Rate bound for unbiased compressors in plain or partial-participation mode, else NaN."""
    T = config.T if T is None else T
    if method.mode == Mode.EF or not method.compressor.unbiased or T < 1:
        return np.nan
    p = config.instance
    c = p.constants
    eff = effective_delta(p, method.compressor, method.sampling)
    return theorem_bound(
        eff["delta_eff"],
        p.n,
        c.L,
        c.mu,
        p.noise_sigma2,
        c.D,
        p.dist2(p.x0),
        T,
        delta=eff["delta"],
        a_s=eff["a_s"],
    )


def _summarize(
    config: ExperimentConfig, records: List[RunRecord]
) -> Tuple[DataFrame, DataFrame]:
    T = config.T
    checkpoints = np.unique(np.linspace(0, T, config.n_checkpoints).round().astype(int))
    summary_rows = list()
    method_rows = list()
    for method in config.methods:
        runs = [r for r in records if r.label == method.name]
        if not runs:
            continue
        gaps, bits = list(), list()
        for r in runs:
            trace = r.trace.set_index("k")
            cumulative = trace["bits_up"].cumsum()
            gaps.append(trace["f_gap"].reindex(checkpoints, method="ffill").values)
            bits.append(cumulative.reindex(checkpoints, method="ffill").values)
        gaps_arr, bits_arr = np.array(gaps, dtype=float), np.array(bits, dtype=float)
        for j, k in enumerate(checkpoints):
            summary_rows.append(
                {
                    "method": method.name,
                    "k": int(k),
                    "f_gap_mean": gaps_arr[:, j].mean(),
                    "f_gap_se": float(standard_error(gaps_arr[:, j])),
                    "bits_mean": bits_arr[:, j].mean(),
                    "n_runs": len(runs),
                }
            )
        hits = [r.iterations_to(config.target_gap) for r in runs]
        converged = [h for h in hits if h is not None]
        output_gaps = np.array([config.instance.f_gap(r.output_point) for r in runs])
        total_bits = np.array([r.total_bits for r in runs], dtype=float)
        iterations = np.array([max(r.iterations, 1) for r in runs], dtype=float)
        method_rows.append(
            {
                "method": method.name,
                "compressor": method.compressor.label,
                "mode": method.mode.value,
                "n_runs": len(runs),
                "diverged": sum(r.diverged for r in runs),
                "bits_total_mean": total_bits.mean(),
                "bits_per_iteration": (total_bits / iterations).mean(),
                "iterations_to_target_mean": np.mean(converged) if converged else np.nan,
                "converged_runs": len(converged),
                "output_gap_mean": output_gaps.mean(),
                "output_gap_se": float(standard_error(output_gaps)),
                "theorem_bound": method_bound(method, config),
            }
        )
    return (
        pd.DataFrame(summary_rows, columns=SUMMARY_COLUMNS),
        pd.DataFrame(method_rows, columns=METHODS_COLUMNS),
    )


def run_experiment(
    config: ExperimentConfig, output_dir: Optional[Path] = None, parallel: bool = True
) -> ExperimentResult:
    """
    Run every method with every seed, write one trace CSV per run, the
    checkpoint summary, the per-method table and the resolved configuration.
    """
    output_dir = Path(output_dir or config.output_dir)
    try:
        output_dir.mkdir()
    except OSError as e:
        raise OSError(f"Could not create output directory '{output_dir}': {e}") from e
    files = [config.to_json(output_dir / RESOLVED_CONFIG_FILE)]
    _check_bit_budgets(config)

    jobs = [(method, seed) for method in config.methods for seed in config.seeds]
    records: List[RunRecord] = (
        parmap.map(_run_job, jobs, config, pm_parallel=parallel and len(jobs) > 1)
        if jobs
        else []
    )
    for record in records:
        files.append(record.to_csv(output_dir / trace_file_name(record.label, record.seed)))

    summary, methods = _summarize(config, records)
    for table, name in [(summary, SUMMARY_FILE), (methods, METHODS_FILE)]:
        path = output_dir / name
        try:
            table.to_csv(path, index=False)
        except OSError as e:
            raise OSError(f"Could not write '{path}': {e}") from e
        files.append(path)

    expected = {m.name: m.expect_divergence for m in config.methods}
    unexpected = [(r.label, r.seed) for r in records if r.diverged and not expected[r.label]]
    for name, seed in unexpected:
        LOGGER.warning("Method '%s' diverged unexpectedly with seed %d.", name, seed)
    LOGGER.info("Wrote %d files to '%s'.", len(files), output_dir)
    return ExperimentResult(files, summary, methods, records, unexpected)


def _scheme_for_n(scheme: SamplingScheme, n: int) -> Optional[SamplingScheme]:
    """Same sampling family over ``n`` nodes; None when it has no natural resizing."""
    if scheme.n == n:
        return scheme
    if scheme.family == SamplingFamily.FULL:
        return SamplingScheme.full(n)
    if scheme.family == SamplingFamily.B_NICE:
        fraction = scheme.b / scheme.n  # type: ignore[operator]
        return SamplingScheme.b_nice(n, min(n, max(1, int(round(fraction * n)))))
    if scheme.family == SamplingFamily.INDEPENDENT:
        p = np.asarray(scheme.probabilities)
        if np.all(p == p[0]):
            return SamplingScheme.independent(np.full(n, p[0]))
    LOGGER.warning("%r cannot be resized to %d nodes; partial participation bounds left empty.", scheme, n)
    return None


def compare_bounds(config: ExperimentConfig) -> DataFrame:
    """
    Rate bounds over the node grid with the problem constants held fixed:
    delta_n = (delta - 1)/n + 1 under full participation, delta unchanged
    for error feedback, and a_S, delta_S and the partial-participation
    bound for methods with a sampling scheme.
    """
    if config.T < 1:
        raise ConfigurationError(["Bound comparison needs T >= 1."])
    p = config.instance
    c = p.constants
    r0 = p.dist2(p.x0)
    rows = list()
    for method in config.methods:
        delta = nominal_delta(method.compressor, p.dim)
        for n in config.n_grid:
            delta_n = (delta - 1) / n + 1
            row = {
                "method": method.name,
                "compressor": method.compressor.label,
                "n": n,
                "delta": delta,
                "delta_n": delta_n,
                "bound_full": theorem_bound(
                    delta_n, n, c.L, c.mu, p.noise_sigma2, c.D, r0, config.T, delta=delta
                ),
                "delta_ef": delta,
                "a_s": np.nan,
                "delta_s": np.nan,
                "bound_pp": np.nan,
            }
            scheme = _scheme_for_n(method.sampling, n) if method.sampling is not None else None
            if scheme is not None:
                a_s, delta_s = pp_variance_parameters(scheme, default_eso_vector(scheme), delta)
                row.update(
                    a_s=a_s,
                    delta_s=delta_s,
                    bound_pp=theorem_bound(
                        delta_s, n, c.L, c.mu, p.noise_sigma2, c.D, r0, config.T, delta=delta, a_s=a_s
                    ),
                )
            rows.append(row)
    return pd.DataFrame(rows, columns=BOUNDS_COLUMNS)


def write_bounds(config: ExperimentConfig, output_dir: Optional[Path] = None) -> Path:
    output_dir = Path(output_dir or config.output_dir)
    output_dir.mkdir()
    path = output_dir / BOUNDS_FILE
    try:
        compare_bounds(config).to_csv(path, index=False)
    except OSError as e:
        raise OSError(f"Could not write '{path}': {e}") from e
    return path
