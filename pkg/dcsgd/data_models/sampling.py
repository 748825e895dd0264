#! /usr/bin/env python

"""
Client samplings: distributions over the subsets of the n nodes that
take part in one round.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Dict, Any

import numpy as np

from dcsgd.defaults import MAX_EXPLICIT_NODES, PROBABILITY_SUM_TOLERANCE
from dcsgd.exceptions import ParameterError
from dcsgd.types import Array, Path, VectorLike


class SamplingFamily(str, Enum):
    FULL = "full"
    B_NICE = "b_nice"
    INDEPENDENT = "independent"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class SamplingScheme:
    """
    Immutable description of a sampling.

    ``b`` is used by b-nice samplings (uniform over subsets of size b),
    ``probabilities`` by independent samplings (node i joins with
    probability p_i) and ``table`` by explicit samplings (pairs of subset
    bitmask and probability, bit i standing for node i).
    """

    family: SamplingFamily
    n: int
    b: Optional[int] = None
    probabilities: Optional[Array] = None
    table: Optional[Tuple[Tuple[int, float], ...]] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "family", SamplingFamily(self.family))
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"Number of nodes must be a positive integer, got {self.n}.")
        object.__setattr__(self, "n", int(self.n))
        if self.family == SamplingFamily.B_NICE:
            if self.b is None or int(self.b) != self.b or not 1 <= self.b <= self.n:
                raise ParameterError(f"b-nice sampling needs 1 <= b <= n={self.n}, got {self.b}.")
            object.__setattr__(self, "b", int(self.b))
        if self.family == SamplingFamily.INDEPENDENT:
            p = np.asarray(self.probabilities, dtype=float)
            if p.shape != (self.n,):
                raise ParameterError(f"Independent sampling needs {self.n} probabilities.")
            if not ((p >= 0) & (p <= 1)).all():
                raise ParameterError("Inclusion probabilities must lie in [0, 1].")
            p.setflags(write=False)
            object.__setattr__(self, "probabilities", p)
        if self.family == SamplingFamily.EXPLICIT:
            if self.n > MAX_EXPLICIT_NODES:
                raise ParameterError(
                    f"Explicit samplings are limited to {MAX_EXPLICIT_NODES} nodes, got {self.n}."
                )
            if not self.table:
                raise ParameterError("Explicit sampling needs a non-empty table.")
            merged: Dict[int, float] = dict()
            for mask, prob in self.table:
                mask, prob = int(mask), float(prob)
                if not 0 <= mask < 2 ** self.n:
                    raise ParameterError(f"Bitmask {mask} is not a subset of {self.n} nodes.")
                if prob < 0:
                    raise ParameterError(f"Negative probability {prob} for bitmask {mask}.")
                merged[mask] = merged.get(mask, 0.0) + prob
            total = sum(merged.values())
            if abs(total - 1) > PROBABILITY_SUM_TOLERANCE:
                raise ParameterError(f"Explicit sampling probabilities sum to {total}, not 1.")
            object.__setattr__(self, "table", tuple(sorted(merged.items())))

    def __repr__(self) -> str:
        if self.family == SamplingFamily.B_NICE:
            return f"SamplingScheme(b_nice, n={self.n}, b={self.b})"
        if self.family == SamplingFamily.INDEPENDENT:
            return f"SamplingScheme(independent, p={self.probabilities.tolist()})"  # type: ignore[union-attr]
        if self.family == SamplingFamily.EXPLICIT:
            return f"SamplingScheme(explicit, n={self.n}, {len(self.table)} subsets)"  # type: ignore[arg-type]
        return f"SamplingScheme(full, n={self.n})"

    # constructors
    @classmethod
    def full(cls, n: int) -> "SamplingScheme":
        return cls(SamplingFamily.FULL, n)

    @classmethod
    def b_nice(cls, n: int, b: int) -> "SamplingScheme":
        return cls(SamplingFamily.B_NICE, n, b=b)

    @classmethod
    def independent(cls, probabilities: VectorLike) -> "SamplingScheme":
        p = np.asarray(probabilities, dtype=float)
        return cls(SamplingFamily.INDEPENDENT, p.size, probabilities=p)

    @classmethod
    def explicit(cls, n: int, table) -> "SamplingScheme":
        return cls(SamplingFamily.EXPLICIT, n, table=tuple((int(m), float(p)) for m, p in table))

    @classmethod
    def from_file(cls, path: Path, n: Optional[int] = None) -> "SamplingScheme":
        """
        Read an explicit sampling from a text table with one
        ``bitmask probability`` pair per line; ``#`` starts a comment.
        Bitmasks are integer literals (``5``, ``0b101``, ``0x5``).
        """
        table = list()
        try:
            with open(path) as handle:
                for number, line in enumerate(handle, 1):
                    line = line.split("#")[0].strip()
                    if not line:
                        continue
                    fields = line.split()
                    if len(fields) != 2:
                        raise ParameterError(
                            f"'{path}', line {number}: expected 'bitmask probability', got '{line}'."
                        )
                    table.append((int(fields[0], 0), float(fields[1])))
        except OSError as e:
            raise OSError(f"Could not read sampling table '{path}': {e}") from e
        except ValueError as e:
            if isinstance(e, ParameterError):
                raise
            raise ParameterError(f"Could not parse sampling table '{path}': {e}") from e
        if n is None:
            n = max(max(mask.bit_length() for mask, _ in table), 1) if table else 1
        return cls.explicit(n, table)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"family": self.family.value, "n": self.n}
        if self.b is not None:
            out["b"] = self.b
        if self.probabilities is not None:
            out["p"] = self.probabilities.tolist()
        if self.table is not None:
            out["table"] = [list(row) for row in self.table]
        return out

    @classmethod
    def from_dict(cls, spec: Dict[str, Any], n: Optional[int] = None) -> "SamplingScheme":
        """
        Parse ``{"family": ..., ...}``; ``n`` fills in the number of nodes when
        the document omits it. b-nice accepts ``b`` or ``fraction`` (of n).
        """
        try:
            family = SamplingFamily(spec["family"])
        except (KeyError, ValueError):
            raise ParameterError(f"Unknown sampling family in {spec!r}.")
        n = spec.get("n", n)
        if family == SamplingFamily.INDEPENDENT:
            return cls.independent(spec["p"])
        if family == SamplingFamily.EXPLICIT:
            if "path" in spec:
                return cls.from_file(Path(spec["path"]), n)
            return cls.explicit(n if n is not None else 1, spec["table"])
        if n is None:
            raise ParameterError(f"Sampling {family.value} needs the number of nodes n.")
        if family == SamplingFamily.B_NICE:
            b = spec.get("b")
            if b is None and "fraction" in spec:
                b = max(1, int(round(spec["fraction"] * n)))
            return cls.b_nice(n, b)
        return cls.full(n)
