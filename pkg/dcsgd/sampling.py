"""
Inclusion probabilities, probability matrices and ESO certificates of
client samplings, exact checks of the partial-participation variance
inequality, and subset draws.
"""

from dataclasses import dataclass
from itertools import combinations, product
from math import comb
from typing import List, Tuple, Sequence

import numpy as np
from scipy.linalg import eigvalsh

from dcsgd.data_models.sampling import SamplingScheme, SamplingFamily
from dcsgd.defaults import MAX_EXPLICIT_NODES, MAX_ENUMERATION_NODES, PSD_TOLERANCE
from dcsgd.exceptions import ParameterError, PropernessError
from dcsgd.types import Array, Matrix, Generator, VectorLike
from dcsgd.utils import mask_to_subset


@dataclass(frozen=True)
class EsoCertificate:
    """
    Result of checking P - pp^T <= Diag(p * v): ``min_eig`` is the smallest
    eigenvalue of Diag(p * v) - (P - pp^T).
    """

    v: Array
    valid: bool
    min_eig: float


def probability_vector(s: SamplingScheme) -> Array:
    """p_i = Prob(i in S); sums to the expected number of sampled nodes."""
    if s.family == SamplingFamily.FULL:
        return np.ones(s.n)
    if s.family == SamplingFamily.B_NICE:
        return np.full(s.n, s.b / s.n)  # type: ignore[operator]
    if s.family == SamplingFamily.INDEPENDENT:
        return np.array(s.probabilities, dtype=float)
    p = np.zeros(s.n)
    for mask, prob in s.table:  # type: ignore[union-attr]
        p[mask_to_subset(mask, s.n)] += prob
    return p


def probability_matrix(s: SamplingScheme) -> Matrix:
    """P_ij = Prob({i, j} in S); symmetric with diagonal p."""
    n = s.n
    if s.family == SamplingFamily.FULL:
        return np.ones((n, n))
    if s.family == SamplingFamily.B_NICE:
        b = s.b
        off = b * (b - 1) / (n * (n - 1)) if n > 1 else 0.0  # type: ignore[operator]
        P = np.full((n, n), off)
        np.fill_diagonal(P, b / n)  # type: ignore[operator]
        return P
    if s.family == SamplingFamily.INDEPENDENT:
        p = probability_vector(s)
        P = np.outer(p, p)
        np.fill_diagonal(P, p)
        return P
    if n > MAX_EXPLICIT_NODES:
        raise ParameterError(f"Explicit samplings are limited to {MAX_EXPLICIT_NODES} nodes.")
    P = np.zeros((n, n))
    for mask, prob in s.table:  # type: ignore[union-attr]
        indicator = np.zeros(n)
        indicator[mask_to_subset(mask, n)] = 1.0
        P += prob * np.outer(indicator, indicator)
    return P


def expected_cardinality(s: SamplingScheme) -> float:
    return float(probability_vector(s).sum())


def is_proper(s: SamplingScheme) -> bool:
    return bool((probability_vector(s) > 0).all())


def require_proper(s: SamplingScheme) -> Array:
    p = probability_vector(s)
    if not (p > 0).all():
        missing = np.flatnonzero(p <= 0).tolist()
        raise PropernessError(f"{s!r} is not proper: nodes {missing} are never sampled.")
    return p


def subset_distribution(s: SamplingScheme) -> List[Tuple[Array, float]]:
    """Every subset with positive probability, paired with that probability."""
    n = s.n
    if s.family == SamplingFamily.FULL:
        return [(np.arange(n), 1.0)]
    if s.family == SamplingFamily.EXPLICIT:
        return [(mask_to_subset(mask, n), prob) for mask, prob in s.table if prob > 0]  # type: ignore[union-attr]
    if n > MAX_EXPLICIT_NODES:
        raise ParameterError(f"Subset enumeration is limited to {MAX_EXPLICIT_NODES} nodes.")
    if s.family == SamplingFamily.B_NICE:
        prob = 1.0 / comb(n, s.b)  # type: ignore[arg-type]
        return [(np.array(c, dtype=int), prob) for c in combinations(range(n), s.b)]  # type: ignore[arg-type]
    p = probability_vector(s)
    out = list()
    for pattern in product((False, True), repeat=n):
        keep = np.array(pattern)
        prob = float(np.prod(np.where(keep, p, 1 - p)))
        if prob > 0:
            out.append((np.flatnonzero(keep), prob))
    return out


def default_eso_vector(s: SamplingScheme) -> Array:
    """v_i = n (1 - p_i), always a valid ESO vector for a proper sampling."""
    p = require_proper(s)
    return s.n * (1 - p)


def validate_eso(s: SamplingScheme, v: VectorLike) -> EsoCertificate:
    """Check P - pp^T <= Diag(p * v) through the smallest eigenvalue of the difference."""
    p = require_proper(s)
    v = np.asarray(v, dtype=float)
    if v.shape != (s.n,):
        raise ParameterError(f"ESO vector must have {s.n} entries, got shape {v.shape}.")
    if (v < 0).any():
        raise ParameterError("ESO vector entries must be non-negative.")
    if s.n > MAX_EXPLICIT_NODES:
        raise ParameterError(f"ESO validation is limited to {MAX_EXPLICIT_NODES} nodes.")
    P = probability_matrix(s)
    difference = np.diag(p * v) - (P - np.outer(p, p))
    min_eig = float(eigvalsh(difference).min())
    return EsoCertificate(v=v, valid=min_eig >= PSD_TOLERANCE, min_eig=min_eig)


def draw_subset(s: SamplingScheme, rng: Generator) -> Array:
    """Sorted node indices of one draw S ~ s."""
    require_proper(s)
    n = s.n
    if s.family == SamplingFamily.FULL:
        return np.arange(n)
    if s.family == SamplingFamily.B_NICE:
        return np.sort(rng.choice(n, size=s.b, replace=False))
    if s.family == SamplingFamily.INDEPENDENT:
        return np.flatnonzero(rng.random(n) < s.probabilities)
    masks = [mask for mask, _ in s.table]  # type: ignore[union-attr]
    cdf = np.cumsum([prob for _, prob in s.table])  # type: ignore[union-attr]
    row = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return mask_to_subset(masks[min(row, len(masks) - 1)], n)


def pp_variance_parameters(
    s: SamplingScheme, v: VectorLike, delta: float
) -> Tuple[float, float]:
    """
    a_S = max_i v_i / p_i and delta_S = (delta a_S + (delta - 1)) / n + 1.

    Raises
    ------
    ParameterError
        If ``v`` is not a valid ESO vector for ``s`` or delta < 1.
    """
    if delta < 1:
        raise ParameterError(f"Variance parameter delta must be >= 1, got {delta}.")
    certificate = validate_eso(s, v)
    if not certificate.valid:
        raise ParameterError(
            f"v is not an ESO vector for {s!r} (min eigenvalue {certificate.min_eig:.3g})."
        )
    p = probability_vector(s)
    a_s = float(np.max(certificate.v / p))
    delta_s = (delta * a_s + (delta - 1)) / s.n + 1
    return a_s, delta_s


def check_variance_inequality(
    s: SamplingScheme, v: VectorLike, zetas: Sequence[VectorLike]
) -> Tuple[float, float]:
    """
    Both sides of E||sum_{i in S} zeta_i / (n p_i) - mean(zeta)||^2
    <= (1/n^2) sum_i v_i / p_i ||zeta_i||^2, the left one by exact enumeration.
    """
    p = require_proper(s)
    n = s.n
    if n > MAX_ENUMERATION_NODES:
        raise ParameterError(f"Exact enumeration is limited to {MAX_ENUMERATION_NODES} nodes.")
    z = np.asarray(zetas, dtype=float)
    if z.ndim != 2 or z.shape[0] != n:
        raise ParameterError(f"Expected {n} vectors, got array of shape {z.shape}.")
    v = np.asarray(v, dtype=float)
    scaled = z / (n * p)[:, np.newaxis]
    average = z.mean(axis=0)
    lhs = 0.0
    for subset, prob in subset_distribution(s):
        estimate = scaled[subset].sum(axis=0)
        lhs += prob * float(((estimate - average) ** 2).sum())
    rhs = float((v / p * (z ** 2).sum(axis=1)).sum() / n ** 2)
    return lhs, rhs
