"""
Compression operators.

Every operator maps a dense vector to a :class:`CompressedMessage`; the
operator C of the theory is ``decompress(compress(spec, x, rng))``.
Randomized operators draw exclusively from the ``rng`` they are given, so an
identical seed gives an identical message.
"""

from itertools import combinations, product
from math import comb, sqrt
from typing import List, Tuple, Optional

import numpy as np

from dcsgd.data_models.message import CompressedMessage, index_bits
from dcsgd.data_models.spec import CompressorSpec, CompressorKind, InducedCompressor
from dcsgd.defaults import VALUE_BITS, TERNARY_SIGN_BITS
from dcsgd.exceptions import ParameterError
from dcsgd.types import Array, DenseVector, Generator, VectorLike
from dcsgd.utils import as_dense_vector, check_budget


Outcomes = List[Tuple[float, DenseVector]]


def _require_rng(rng: Optional[Generator]) -> Generator:
    if rng is None:
        raise ParameterError("A randomized compressor needs a seeded random generator.")
    return rng


def compress_identity(x: VectorLike) -> CompressedMessage:
    x = as_dense_vector(x)
    return CompressedMessage.sparse(np.arange(x.size), x, x.size)


def top_k_indices(x: DenseVector, k: int) -> Array:
    # stable sort: equal magnitudes keep the lower index first
    return np.sort(np.argsort(-np.abs(x), kind="stable")[:k])


def compress_top_k(x: VectorLike, k: int) -> CompressedMessage:
    """Keep the ``k`` entries of largest magnitude, unscaled."""
    x = as_dense_vector(x)
    k = check_budget(k, x.size)
    idx = top_k_indices(x, k)
    return CompressedMessage.sparse(idx, x[idx], x.size)


def compress_rand_k(x: VectorLike, k: int, rng: Generator) -> CompressedMessage:
    """Keep ``k`` uniformly chosen coordinates, scaled by d/k."""
    x = as_dense_vector(x)
    d = x.size
    k = check_budget(k, d)
    idx = np.sort(_require_rng(rng).choice(d, size=k, replace=False))
    return CompressedMessage.sparse(idx, x[idx] * (d / k), d)


def nu_rand1_probabilities(x: DenseVector) -> Array:
    mass = np.abs(x).sum()
    if mass == 0:
        return np.zeros_like(x)
    return np.abs(x) / mass


def compress_nu_rand1(x: VectorLike, rng: Generator) -> CompressedMessage:
    """
    Keep a single coordinate i, drawn with probability |x_i| / sum_j |x_j|,
    and send x_i / p_i. The zero vector gives an empty message.
    """
    x = as_dense_vector(x)
    p = nu_rand1_probabilities(x)
    if not p.any():
        return CompressedMessage.empty(x.size)
    i = int(_require_rng(rng).choice(x.size, p=p))
    return CompressedMessage.sparse([i], [x[i] / p[i]], x.size)


def wangni_probabilities(x: VectorLike, k: int) -> Array:
    """
    Keep-probabilities of magnitude-weighted sparsification.

    Starts from p_i = k |x_i| / sum_j |x_j| and repeatedly clamps
    probabilities above one, handing the left-over budget to the remaining
    coordinates in proportion to their magnitude, until nothing exceeds one.
    The result satisfies sum(p) <= k, with equality unless clamping
    exhausts every nonzero coordinate.
    """
    x = as_dense_vector(x)
    k = check_budget(k, x.size)
    magnitude = np.abs(x)
    p = np.zeros_like(magnitude)
    active = magnitude > 0
    clamped = np.zeros_like(active)
    while active.any():
        budget = k - clamped.sum()
        p[active] = budget * magnitude[active] / magnitude[active].sum()
        over = active & (p >= 1)
        if not over.any():
            break
        p[over] = 1.0
        clamped |= over
        active &= ~over
    return p


def compress_wangni(x: VectorLike, k: int, rng: Generator) -> CompressedMessage:
    """Keep each coordinate independently with its water-filled probability, scaled by 1/p_i."""
    x = as_dense_vector(x)
    p = wangni_probabilities(x, k)
    keep = _require_rng(rng).random(x.size) < p
    idx = np.flatnonzero(keep)
    return CompressedMessage.sparse(idx, x[idx] / p[idx], x.size)


def compress_ternary_dither(x: VectorLike, rng: Generator) -> CompressedMessage:
    """
    One-level dithering with the infinity norm: coordinate i is sent as
    sign(x_i) * max|x| with probability |x_i| / max|x|, else 0.
    """
    x = as_dense_vector(x)
    scale = float(np.abs(x).max())
    if scale == 0:
        return CompressedMessage.ternary(0.0, np.zeros(x.size, dtype=np.int8))
    keep = _require_rng(rng).random(x.size) < np.abs(x) / scale
    return CompressedMessage.ternary(scale, np.sign(x).astype(np.int8) * keep)


def decompress(m: CompressedMessage) -> DenseVector:
    """Dense vector of length ``m.dim`` carried by the message."""
    return m.to_dense()


def compress(
    spec: CompressorSpec, x: VectorLike, rng: Optional[Generator] = None
) -> CompressedMessage:
    """Apply the operator described by ``spec`` to ``x``."""
    x = as_dense_vector(x)
    spec.check_dim(x.size)
    kind = spec.kind
    if kind == CompressorKind.IDENTITY:
        return compress_identity(x)
    if kind == CompressorKind.TOP_K:
        return compress_top_k(x, spec.k)  # type: ignore[arg-type]
    if kind == CompressorKind.RAND_K:
        return compress_rand_k(x, spec.k, _require_rng(rng))  # type: ignore[arg-type]
    if kind == CompressorKind.NU_RAND_1:
        return compress_nu_rand1(x, _require_rng(rng))
    if kind == CompressorKind.WANGNI_K:
        return compress_wangni(x, spec.k, _require_rng(rng))  # type: ignore[arg-type]
    if kind == CompressorKind.TERNARY_DITHER:
        return compress_ternary_dither(x, _require_rng(rng))
    if kind == CompressorKind.INDUCED:
        from dcsgd.induced import induced_compress

        return induced_compress(InducedCompressor.from_spec(spec), x, rng)
    raise ParameterError(f"Unknown compressor kind: {kind}.")


def nominal_delta(spec: CompressorSpec, d: int) -> float:
    """
    Analytic variance parameter of ``spec`` at dimension ``d``.

    For unbiased operators this is the delta of E||C(x)||^2 <= delta ||x||^2;
    for Top-K it is the delta of ||C(x) - x||^2 <= (1 - 1/delta) ||x||^2.
    NU Rand-1 (d) and Wangni-K (d/k) are worst-case bounds and ternary
    dithering uses sqrt(d), from E||C(x)||^2 = ||x||_inf ||x||_1 <= sqrt(d) ||x||^2.
    """
    spec.check_dim(d)
    kind = spec.kind
    if kind == CompressorKind.IDENTITY:
        return 1.0
    if kind in (CompressorKind.TOP_K, CompressorKind.RAND_K, CompressorKind.WANGNI_K):
        return d / spec.k  # type: ignore[operator]
    if kind == CompressorKind.NU_RAND_1:
        return float(d)
    if kind == CompressorKind.TERNARY_DITHER:
        return sqrt(d)
    if kind == CompressorKind.INDUCED:
        from dcsgd.induced import induced_delta

        first, second = spec.inner  # type: ignore[misc]
        return induced_delta(nominal_delta(first, d), nominal_delta(second, d))
    raise ParameterError(f"Unknown compressor kind: {kind}.")


def contractive_scaling(spec: CompressorSpec, d: int) -> float:
    """
    Scaling lambda under which ``spec`` is contractive: 1 for Top-K and the
    identity, 1/delta for unbiased operators (an unbiased operator of
    parameter delta is contractive once divided by delta).
    """
    if spec.kind in (CompressorKind.IDENTITY, CompressorKind.TOP_K):
        return 1.0
    return 1.0 / nominal_delta(spec, d)


def nominal_bit_cost(spec: CompressorSpec, d: int) -> float:
    """Expected bits of one message of ``spec`` at dimension ``d`` (upper bound for Wangni-K)."""
    spec.check_dim(d)
    entry = index_bits(d) + VALUE_BITS
    kind = spec.kind
    if kind == CompressorKind.IDENTITY:
        return float(d * entry)
    if kind in (CompressorKind.TOP_K, CompressorKind.RAND_K, CompressorKind.WANGNI_K):
        return float(spec.k * entry)  # type: ignore[operator]
    if kind == CompressorKind.NU_RAND_1:
        return float(entry)
    if kind == CompressorKind.TERNARY_DITHER:
        return float(VALUE_BITS + TERNARY_SIGN_BITS * d)
    first, second = spec.inner  # type: ignore[misc]
    return nominal_bit_cost(first, d) + nominal_bit_cost(second, d)


def _bernoulli_outcomes(values: DenseVector, p: Array) -> Outcomes:
    """All keep/drop patterns of independent coordinates kept with probability p."""
    outcomes: Outcomes = list()
    for pattern in product((False, True), repeat=values.size):
        keep = np.array(pattern)
        prob = float(np.prod(np.where(keep, p, 1 - p)))
        if prob == 0:
            continue
        outcomes.append((prob, np.where(keep, values, 0.0)))
    return outcomes


def exact_outcomes(spec: CompressorSpec, x: VectorLike) -> Outcomes:
    """
    Every possible output of ``spec`` on ``x`` with its probability.

    Exponential in d for the Bernoulli operators; meant for small d.
    """
    x = as_dense_vector(x)
    spec.check_dim(x.size)
    d = x.size
    kind = spec.kind
    if kind in (CompressorKind.IDENTITY, CompressorKind.TOP_K):
        return [(1.0, decompress(compress(spec, x)))]
    if kind == CompressorKind.RAND_K:
        k = spec.k
        prob = 1.0 / comb(d, k)  # type: ignore[arg-type]
        outcomes: Outcomes = list()
        for subset in combinations(range(d), k):  # type: ignore[arg-type]
            idx = np.array(subset)
            out = np.zeros(d)
            out[idx] = x[idx] * (d / k)  # type: ignore[operator]
            outcomes.append((prob, out))
        return outcomes
    if kind == CompressorKind.NU_RAND_1:
        p = nu_rand1_probabilities(x)
        if not p.any():
            return [(1.0, np.zeros(d))]
        outcomes = list()
        for i in np.flatnonzero(p):
            out = np.zeros(d)
            out[i] = x[i] / p[i]
            outcomes.append((float(p[i]), out))
        return outcomes
    if kind == CompressorKind.WANGNI_K:
        p = wangni_probabilities(x, spec.k)  # type: ignore[arg-type]
        scaled = np.divide(x, p, out=np.zeros(d), where=p > 0)
        return _bernoulli_outcomes(scaled, p)
    if kind == CompressorKind.TERNARY_DITHER:
        scale = float(np.abs(x).max())
        if scale == 0:
            return [(1.0, np.zeros(d))]
        return _bernoulli_outcomes(scale * np.sign(x), np.abs(x) / scale)
    if kind == CompressorKind.INDUCED:
        first, second = spec.inner  # type: ignore[misc]
        outcomes = list()
        for p1, v1 in exact_outcomes(first, x):
            for p2, v2 in exact_outcomes(second, x - v1):
                outcomes.append((p1 * p2, v1 + v2))
        return outcomes
    raise ParameterError(f"Unknown compressor kind: {kind}.")


def outcome_moments(outcomes: Outcomes) -> Tuple[DenseVector, float]:
    """Mean vector and second moment E||C(x)||^2 of an enumerated distribution."""
    probs = np.array([p for p, _ in outcomes])
    values = np.array([v for _, v in outcomes])
    mean = probs @ values
    second = float(probs @ (values ** 2).sum(axis=1))
    return mean, second
