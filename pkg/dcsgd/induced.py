"""
The induced compressor: a contractive operator followed by an unbiased
compression of its error, C(x) = C1(x) + C2(x - C1(x)).
"""

from typing import Optional

from dcsgd.compressors import compress, decompress
from dcsgd.data_models.message import CompressedMessage
from dcsgd.data_models.spec import InducedCompressor
from dcsgd.exceptions import ParameterError
from dcsgd.types import Generator, VectorLike
from dcsgd.utils import as_dense_vector


def induced_compress(
    ic: InducedCompressor, x: VectorLike, rng: Optional[Generator] = None
) -> CompressedMessage:
    """
    Composite message (C1(x), C2(x - C1(x))).

    The error vector lives only inside this call.
    """
    x = as_dense_vector(x)
    first = compress(ic.c1, x, rng)
    second = compress(ic.c2, x - decompress(first), rng)
    return CompressedMessage.composite(first, second)


def induced_delta(delta1: float, delta2: float) -> float:
    """delta2 (1 - 1/delta1) + 1/delta1; lies in [1, delta2]."""
    if delta1 < 1 or delta2 < 1:
        raise ParameterError(
            f"Variance parameters must be >= 1, got delta1={delta1}, delta2={delta2}."
        )
    return delta2 * (1 - 1 / delta1) + 1 / delta1


def induced_variance_bound(delta1: float, delta2: float) -> float:
    """Factor (delta2 - 1)(1 - 1/delta1) bounding E||C(x) - x||^2 / ||x||^2."""
    return induced_delta(delta1, delta2) - 1
