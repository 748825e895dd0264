#! /usr/bin/env python

"""
Low-level helpers: input validation, counter-based random streams,
subset/bitmask conversion and JSON encoding.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Dict, Callable, Any, Iterable, Optional

import numpy as np

from dcsgd.types import Array, DenseVector, Generator, VectorLike
from dcsgd.exceptions import ParameterError
from dcsgd.defaults import (
    STREAM_GRADIENT,
    STREAM_COMPRESSION,
    STREAM_SAMPLING,
    STREAM_OUTPUT,
)


def filter_kwargs_by_callable(
    kwargs: Dict[str, Any], callabl: Callable, exclude: List[str] = None
) -> Dict[str, Any]:
    from inspect import signature

    args = signature(callabl).parameters.keys()
    return {
        k: v
        for k, v in kwargs.items()
        if (k in args) and k not in (exclude or [])
    }


def as_dense_vector(x: VectorLike, dim: Optional[int] = None) -> DenseVector:
    """
    Coerce ``x`` to a one-dimensional float64 array and check it.

    Raises
    ------
    ParameterError
        If ``x`` is not one-dimensional, is empty, has non-finite entries
        or does not have length ``dim`` (when given).
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ParameterError(
            f"Expected a non-empty one-dimensional vector, got shape {arr.shape}."
        )
    if dim is not None and arr.size != dim:
        raise ParameterError(
            f"Dimension mismatch: expected length {dim}, got {arr.size}."
        )
    if not np.isfinite(arr).all():
        raise ParameterError("Vector has non-finite entries.")
    return arr


def check_budget(k: int, d: int) -> int:
    if int(k) != k or not 1 <= k <= d:
        raise ParameterError(f"Budget k must satisfy 1 <= k <= d={d}, got {k}.")
    return int(k)


def counter_stream(seed: int, *counters: int) -> Generator:
    """
    Random generator keyed by ``(seed, *counters)``.

    Streams for distinct counters are statistically independent and do not
    depend on the order in which they are requested.
    """
    return np.random.default_rng([int(seed)] + [int(c) for c in counters])


@dataclass(frozen=True)
class StepStreams:
    """Factory of the random streams used during iteration ``step`` of a run."""

    seed: int
    step: int

    def gradient(self, node: int) -> Generator:
        return counter_stream(self.seed, self.step, node, STREAM_GRADIENT)

    def compression(self, node: int) -> Generator:
        return counter_stream(self.seed, self.step, node, STREAM_COMPRESSION)

    def sampling(self) -> Generator:
        return counter_stream(self.seed, self.step, 0, STREAM_SAMPLING)

    def output(self) -> Generator:
        return counter_stream(self.seed, self.step, 0, STREAM_OUTPUT)


def mask_to_subset(mask: int, n: int) -> Array:
    if mask < 0 or mask >= 2 ** n:
        raise ParameterError(f"Bitmask {mask} does not describe a subset of {n} nodes.")
    return np.array([i for i in range(n) if (mask >> i) & 1], dtype=int)


def subset_to_mask(subset: Iterable[int]) -> int:
    mask = 0
    for i in subset:
        mask |= 1 << int(i)
    return mask


def standard_error(values: Array, axis: int = 0) -> Array:
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if n < 2:
        return np.zeros_like(values.mean(axis=axis))
    return values.std(axis=axis, ddof=1) / np.sqrt(n)


def encode(obj: Any) -> Any:
    """
    For serializing to JSON with no numpy or Python object references.

    No roundtrip!
    """
    if isinstance(obj, np.ndarray):
        return [encode(item) for item in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (list, tuple)):
        return [encode(item) for item in obj]
    if isinstance(obj, (dict, OrderedDict)):
        return {str(encode(key)): encode(value) for key, value in obj.items()}
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, str):
        # enum members
        return obj.value
    return obj
