#! /usr/bin/env python

"""
Distributed compressed SGD: the plain, error-feedback and
partial-participation steps, the training loop and the rate bounds.

Gradients, compression and subset draws for iteration k take their
randomness from streams keyed by (seed, k, node), so a run is reproducible
bit for bit whatever the order in which workers are evaluated.
Aggregation always sums in node order.
"""

from math import exp
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from dcsgd import LOGGER
from dcsgd.compressors import compress, decompress, exact_outcomes, outcome_moments
from dcsgd.data_models.problem import ProblemInstance
from dcsgd.data_models.run import Mode, RunRecord, Schedule, ScheduleKind, WorkerState
from dcsgd.data_models.sampling import SamplingScheme
from dcsgd.data_models.spec import CompressorSpec
from dcsgd.defaults import DIVERGENCE_THRESHOLD, TRACE_COLUMNS
from dcsgd.exceptions import (
    AttributeNotSetError,
    ConfigurationError,
    ParameterError,
    cast,
)
from dcsgd.problems import gradient_oracle
from dcsgd.sampling import draw_subset, require_proper, subset_distribution
from dcsgd.types import Array, DenseVector
from dcsgd.utils import StepStreams, as_dense_vector


Step = Tuple[DenseVector, int]


def make_workers(n: int, d: int, mode: Union[Mode, str]) -> List[WorkerState]:
    """Fresh workers; error-feedback workers start with e_i = 0."""
    mode = Mode(mode)
    return [
        WorkerState(i, np.zeros(d) if mode == Mode.EF else None) for i in range(n)
    ]


def _check_workers(problem: ProblemInstance, workers: Sequence[WorkerState], ef: bool) -> None:
    if len(workers) != problem.n:
        raise ParameterError(f"Expected {problem.n} workers, got {len(workers)}.")
    for worker in workers:
        if ef and worker.error is None:
            raise AttributeNotSetError(f"{worker!r} has no error vector.")
        if not ef and worker.error is not None:
            raise ParameterError(f"{worker!r} carries an error vector outside error-feedback mode.")


def _check_eta(eta: float) -> None:
    if not eta > 0 or not np.isfinite(eta):
        raise ParameterError(f"Stepsize must be positive and finite, got {eta}.")


def _transmit(
    compressor: CompressorSpec, payload: DenseVector, node: int, rng: StepStreams
) -> Step:
    message = compress(compressor, payload, rng.compression(node))
    return decompress(message), message.bit_cost


def _local_gradient(problem: ProblemInstance, i: int, x: DenseVector, rng: StepStreams) -> DenseVector:
    return gradient_oracle(problem, i, x, rng.gradient(i) if problem.noise_sigma2 > 0 else None)


def _weighted_sum(weights: Sequence[float], vectors: Sequence[DenseVector], d: int) -> DenseVector:
    total = np.zeros(d)
    for w, v in zip(weights, vectors):
        total += w * v
    return total


def _plain_direction(
    problem: ProblemInstance, x: DenseVector, compressor: CompressorSpec, rng: StepStreams
) -> Step:
    n = problem.n
    vectors, bits = list(), 0
    for i in range(n):
        v, b = _transmit(compressor, _local_gradient(problem, i, x, rng), i, rng)
        vectors.append(v)
        bits += b
    return _weighted_sum([1 / n] * n, vectors, problem.dim), bits


def _partial_direction(
    problem: ProblemInstance,
    x: DenseVector,
    compressor: CompressorSpec,
    scheme: SamplingScheme,
    rng: StepStreams,
) -> Step:
    if scheme.n != problem.n:
        raise ParameterError(f"Sampling over {scheme.n} nodes used with {problem.n} nodes.")
    p = require_proper(scheme)
    n = problem.n
    vectors, weights, bits = list(), list(), 0
    for i in draw_subset(scheme, rng.sampling()).tolist():
        v, b = _transmit(compressor, _local_gradient(problem, i, x, rng), i, rng)
        vectors.append(v)
        weights.append(1 / (n * p[i]))
        bits += b
    return _weighted_sum(weights, vectors, problem.dim), bits


def dcsgd_step(
    problem: ProblemInstance,
    x: DenseVector,
    workers: Sequence[WorkerState],
    compressor: CompressorSpec,
    eta: float,
    rng: StepStreams,
) -> Step:
    """x - eta (1/n) sum_i C(g_i); returns the new point and the uplink bits."""
    _check_eta(eta)
    _check_workers(problem, workers, ef=False)
    direction, bits = _plain_direction(problem, x, compressor, rng)
    return x - eta * direction, bits


def ef_step(
    problem: ProblemInstance,
    x: DenseVector,
    workers: Sequence[WorkerState],
    compressor: CompressorSpec,
    eta: float,
    rng: StepStreams,
) -> Step:
    """
    Error feedback: each worker sends Delta_i = C(eta g_i + e_i) and keeps
    e_i <- eta g_i + e_i - Delta_i; the master moves to x - mean(Delta_i).

    Worker error vectors are updated in place.
    """
    _check_eta(eta)
    _check_workers(problem, workers, ef=True)
    n = problem.n
    vectors, bits = list(), 0
    for worker in workers:
        i = worker.node_index
        corrected = eta * _local_gradient(problem, i, x, rng) + cast(worker.error)
        v, b = _transmit(compressor, corrected, i, rng)
        worker.error = corrected - v
        vectors.append(v)
        bits += b
    return x - _weighted_sum([1 / n] * n, vectors, problem.dim), bits


def pp_step(
    problem: ProblemInstance,
    x: DenseVector,
    workers: Sequence[WorkerState],
    compressor: CompressorSpec,
    scheme: SamplingScheme,
    eta: float,
    rng: StepStreams,
) -> Step:
    """
    Partial participation: only the drawn subset S computes and transmits;
    the master moves to x - eta sum_{i in S} C(g_i) / (n p_i).
    """
    _check_eta(eta)
    _check_workers(problem, workers, ef=False)
    direction, bits = _partial_direction(problem, x, compressor, scheme, rng)
    return x - eta * direction, bits


def make_schedule(a: float, d: float, T: int) -> Schedule:
    """Two-phase schedule for the recursion with constants a (= mu) and d (= 2 delta_n L)."""
    return Schedule.two_phase(a, d, T)


def _validate_run(
    problem: ProblemInstance,
    mode: Mode,
    compressor: CompressorSpec,
    scheme: Optional[SamplingScheme],
    schedule: Schedule,
    T: int,
) -> None:
    problems = list()
    if mode == Mode.PP and scheme is None:
        problems.append("Partial participation needs a sampling scheme.")
    if mode != Mode.PP and scheme is not None:
        problems.append(f"A sampling scheme was given for mode '{mode.value}'.")
    if scheme is not None and scheme.n != problem.n:
        problems.append(f"Sampling over {scheme.n} nodes for a problem with {problem.n} nodes.")
    if schedule.kind == ScheduleKind.TWO_PHASE and schedule.T != T:
        problems.append(f"Schedule horizon {schedule.T} differs from the run length {T}.")
    if int(T) != T or T < 0:
        problems.append(f"Number of iterations must be a non-negative integer, got {T}.")
    try:
        compressor.check_dim(problem.dim)
    except ParameterError as e:
        problems.append(str(e))
    if problems:
        raise ConfigurationError(problems)


def run(
    problem: ProblemInstance,
    mode: Union[Mode, str],
    compressor: CompressorSpec,
    scheme: Optional[SamplingScheme] = None,
    schedule: Optional[Schedule] = None,
    T: int = 100,
    seed: int = 0,
    keep_iterates: bool = False,
    label: Optional[str] = None,
) -> RunRecord:
    """
    Run ``T`` iterations from ``problem.x0``.

    The output point is drawn among x^0..x^T with probability proportional
    to the schedule weights by weighted reservoir sampling. A run stops
    early and is flagged diverged when the iterate stops being finite or
    its norm exceeds the divergence threshold; the diverging row is kept
    but never selected as output.
    """
    try:
        mode = Mode(mode)
    except ValueError:
        raise ConfigurationError([f"Unknown mode '{mode}'; choose one of {[m.value for m in Mode]}."])
    if schedule is None:
        raise ConfigurationError(["A run needs a schedule."])
    _validate_run(problem, mode, compressor, scheme, schedule, T)
    label = label or f"{compressor.label}-{mode.value}"

    workers = make_workers(problem.n, problem.dim, mode)
    x = problem.x0.copy()
    rows = [(0, problem.f_gap(x), problem.dist2(x), 0)]
    iterates = [x.copy()] if keep_iterates else None

    total_weight = schedule.weight(0)
    output, output_index = x.copy(), 0
    diverged = False
    for k in range(T):
        streams = StepStreams(seed, k)
        eta = schedule.stepsize(k)
        if mode == Mode.PLAIN:
            x, bits = dcsgd_step(problem, x, workers, compressor, eta, streams)
        elif mode == Mode.EF:
            x, bits = ef_step(problem, x, workers, compressor, eta, streams)
        else:
            x, bits = pp_step(problem, x, workers, compressor, cast(scheme), eta, streams)
        finite = bool(np.isfinite(x).all())
        rows.append(
            (k + 1, problem.f_gap(x) if finite else np.nan, problem.dist2(x) if finite else np.nan, bits)
        )
        if keep_iterates:
            iterates.append(x.copy())  # type: ignore[union-attr]
        if not finite or np.linalg.norm(x) > DIVERGENCE_THRESHOLD:
            diverged = True
            LOGGER.warning("Run '%s' (seed %d) diverged at iteration %d.", label, seed, k + 1)
            break
        w = schedule.weight(k + 1)
        if w > 0:
            total_weight += w
            if StepStreams(seed, k + 1).output().random() < w / total_weight:
                output, output_index = x.copy(), k + 1
        LOGGER.debug("%s k=%d f_gap=%.3e bits=%d", label, k + 1, rows[-1][1], bits)

    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    return RunRecord(
        trace=trace,
        output_point=output,
        output_index=output_index,
        diverged=diverged,
        label=label,
        seed=seed,
        iterates=np.array(iterates) if keep_iterates else None,
    )


def _check_bound_inputs(mu: float, T: int) -> None:
    if not mu > 0:
        raise ParameterError(f"Rate bounds need mu > 0, got {mu}.")
    if not T >= 1:
        raise ParameterError(f"Rate bounds need T >= 1, got {T}.")


def theorem_bound(
    delta_eff: float,
    n: int,
    L: float,
    mu: float,
    sigma2: float,
    D: float,
    r0: float,
    T: int,
    delta: Optional[float] = None,
    a_s: float = 0.0,
) -> float:
    """
    64 de L r0 exp(-mu T / (4 de L)) + 36 ((de - 1) D + (1 + a_S) delta sigma2 / n) / (mu T).

    ``delta_eff`` (de) is delta_n under full participation or delta_S under
    partial participation, with the matching ``a_s``. When ``delta`` is not
    given it is recovered from delta_n = 1 + (delta - 1) / n.
    """
    _check_bound_inputs(mu, T)
    if delta_eff < 1:
        raise ParameterError(f"Effective variance parameter must be >= 1, got {delta_eff}.")
    if delta is None:
        delta = n * (delta_eff - 1) + 1
    linear = 64 * delta_eff * L * r0 * exp(-mu * T / (4 * delta_eff * L))
    noise = 36 * ((delta_eff - 1) * D + (1 + a_s) * delta * sigma2 / n) / (mu * T)
    return linear + noise


def recursion_constants(
    mu: float,
    L: float,
    delta: float,
    n: int,
    sigma2: float,
    D: float,
    a_s: Optional[float] = None,
) -> Tuple[float, float, float]:
    """
    (a, c, d) of r^{k+1} <= (1 - a eta) r^k - eta s^k + eta^2 c with stepsizes
    below 1/d: a = mu, c = (de - 1) D + (1 + a_S) delta sigma2 / n and d = 2 de L.
    """
    if delta < 1:
        raise ParameterError(f"Variance parameter delta must be >= 1, got {delta}.")
    if a_s is None:
        delta_eff, a_s = (delta - 1) / n + 1, 0.0
    else:
        delta_eff = (delta * a_s + delta - 1) / n + 1
    c = (delta_eff - 1) * D + (1 + a_s) * delta * sigma2 / n
    return mu, c, 2 * delta_eff * L


def constant_step_bound(a: float, c: float, d: float, r0: float, T: int) -> float:
    """Constant stepsize 1/d: r0 exp(-a T / d) + c / (a d)."""
    _check_bound_inputs(a, T)
    return r0 * exp(-a * T / d) + c / (a * d)


def decreasing_step_bound(a: float, c: float, d: float, r0: float, T: int) -> float:
    """Stepsizes 2 / (a (kappa + k)) with kappa = 2d/a: 2 a kappa^2 r0 / T^2 + 2 c / (a T)."""
    _check_bound_inputs(a, T)
    kappa = 2 * d / a
    return 2 * a * kappa ** 2 * r0 / T ** 2 + 2 * c / (a * T)


def schedule_bound(a: float, c: float, d: float, r0: float, T: int) -> float:
    """Two-phase schedule: 32 d r0 exp(-a T / (2d)) + 36 c / (a T)."""
    _check_bound_inputs(a, T)
    return 32 * d * r0 * exp(-a * T / (2 * d)) + 36 * c / (a * T)


def exact_aggregate_mean(
    problem: ProblemInstance,
    x: DenseVector,
    compressor: CompressorSpec,
    scheme: Optional[SamplingScheme] = None,
) -> DenseVector:
    """
    E[Delta | x] for one plain (``scheme=None``) or partial-participation
    step, by enumeration of compressor outcomes and sampled subsets.
    """
    if problem.noise_sigma2 > 0:
        raise ParameterError("Exact aggregation needs a noiseless gradient oracle.")
    x = as_dense_vector(x, problem.dim)
    n = problem.n
    means = [
        outcome_moments(exact_outcomes(compressor, node.gradient(x)))[0]
        for node in problem.nodes
    ]
    if scheme is None:
        return _weighted_sum([1 / n] * n, means, problem.dim)
    p = require_proper(scheme)
    total = np.zeros(problem.dim)
    for subset, prob in subset_distribution(scheme):
        total += prob * _weighted_sum(
            [1 / (n * p[i]) for i in subset], [means[i] for i in subset], problem.dim
        )
    return total


def sample_aggregates(
    problem: ProblemInstance,
    x: DenseVector,
    compressor: CompressorSpec,
    samples: int,
    seed: int = 0,
    scheme: Optional[SamplingScheme] = None,
) -> Array:
    """
    ``samples`` independent draws of the aggregated direction Delta at ``x``
    (without the stepsize), one per row.
    """
    x = as_dense_vector(x, problem.dim)
    draws = np.empty((samples, problem.dim))
    for s in range(samples):
        streams = StepStreams(seed, s)
        if scheme is None:
            draws[s], _ = _plain_direction(problem, x, compressor, streams)
        else:
            draws[s], _ = _partial_direction(problem, x, compressor, scheme, streams)
    return draws
