#! /usr/bin/env python

"""
Parameterized descriptions of compression operators.
"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Dict, Any

from dcsgd.exceptions import ParameterError


class CompressorKind(str, Enum):
    IDENTITY = "identity"
    TOP_K = "top_k"
    RAND_K = "rand_k"
    NU_RAND_1 = "nu_rand1"
    WANGNI_K = "wangni"
    TERNARY_DITHER = "ternary"
    INDUCED = "induced"


# operators whose output has expectation x
UNBIASED_KINDS = frozenset(
    {
        CompressorKind.IDENTITY,
        CompressorKind.RAND_K,
        CompressorKind.NU_RAND_1,
        CompressorKind.WANGNI_K,
        CompressorKind.TERNARY_DITHER,
        CompressorKind.INDUCED,
    }
)
# operators contractive with scaling 1
CONTRACTIVE_KINDS = frozenset({CompressorKind.IDENTITY, CompressorKind.TOP_K})
BUDGETED_KINDS = frozenset(
    {CompressorKind.TOP_K, CompressorKind.RAND_K, CompressorKind.WANGNI_K}
)


@dataclass(frozen=True)
class CompressorSpec:
    """
    One compression operator: its kind, its budget ``k`` (Top-K, Rand-K,
    Wangni-K) and, for induced operators, the pair of inner specs.
    """

    kind: CompressorKind
    k: Optional[int] = None
    inner: Optional[Tuple["CompressorSpec", "CompressorSpec"]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CompressorKind(self.kind))
        if self.kind in BUDGETED_KINDS:
            if self.k is None or int(self.k) != self.k or self.k < 1:
                raise ParameterError(f"{self.kind.value} requires a budget k >= 1, got {self.k}.")
            object.__setattr__(self, "k", int(self.k))
        elif self.k is not None:
            raise ParameterError(f"{self.kind.value} does not take a budget k.")
        if self.kind == CompressorKind.INDUCED:
            if self.inner is None or len(self.inner) != 2:
                raise ParameterError("Induced compressor requires a pair of inner specs.")
            first, second = self.inner
            if first.kind not in CONTRACTIVE_KINDS:
                raise ParameterError(
                    f"First stage of an induced compressor must be contractive "
                    f"with scaling 1 (top_k or identity), got {first.kind.value}."
                )
            if second.kind not in UNBIASED_KINDS:
                raise ParameterError(
                    f"Second stage of an induced compressor must be unbiased, got {second.kind.value}."
                )
            object.__setattr__(self, "inner", (first, second))
        elif self.inner is not None:
            raise ParameterError(f"{self.kind.value} does not take inner specs.")

    # constructors
    @classmethod
    def identity(cls) -> "CompressorSpec":
        return cls(CompressorKind.IDENTITY)

    @classmethod
    def top_k(cls, k: int) -> "CompressorSpec":
        return cls(CompressorKind.TOP_K, k)

    @classmethod
    def rand_k(cls, k: int) -> "CompressorSpec":
        return cls(CompressorKind.RAND_K, k)

    @classmethod
    def nu_rand1(cls) -> "CompressorSpec":
        return cls(CompressorKind.NU_RAND_1)

    @classmethod
    def wangni(cls, k: int) -> "CompressorSpec":
        return cls(CompressorKind.WANGNI_K, k)

    @classmethod
    def ternary(cls) -> "CompressorSpec":
        return cls(CompressorKind.TERNARY_DITHER)

    @classmethod
    def induced(cls, first: "CompressorSpec", second: "CompressorSpec") -> "CompressorSpec":
        return cls(CompressorKind.INDUCED, inner=(first, second))

    @property
    def unbiased(self) -> bool:
        return self.kind in UNBIASED_KINDS

    @property
    def label(self) -> str:
        if self.kind == CompressorKind.INDUCED:
            first, second = self.inner  # type: ignore[misc]
            return f"induced({first.label}+{second.label})"
        if self.k is not None:
            return f"{self.kind.value}({self.k})"
        return self.kind.value

    def __str__(self) -> str:
        return self.label

    def check_dim(self, d: int) -> None:
        """Raise :class:`ParameterError` if the spec cannot act on dimension ``d``."""
        if self.k is not None and self.k > d:
            raise ParameterError(f"{self.label}: budget k={self.k} exceeds dimension d={d}.")
        if self.inner is not None:
            for part in self.inner:
                part.check_dim(d)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind.value}
        if self.k is not None:
            out["k"] = self.k
        if self.inner is not None:
            out["first"] = self.inner[0].to_dict()
            out["second"] = self.inner[1].to_dict()
        return out

    @classmethod
    def from_dict(cls, spec: Dict[str, Any]) -> "CompressorSpec":
        """
        Parse ``{"kind": ..., "k": ...}``. Induced specs are given either as
        ``{"kind": "induced", "first": {...}, "second": {...}}`` or by budget as
        ``{"kind": "induced", "k": 4, "split": 0.5, "second": "rand_k"}``.
        """
        try:
            kind = CompressorKind(spec["kind"])
        except (KeyError, ValueError):
            raise ParameterError(f"Unknown compressor kind in {spec!r}.")
        if kind != CompressorKind.INDUCED:
            return cls(kind, spec.get("k"))
        if isinstance(spec.get("first"), dict):
            return cls.induced(cls.from_dict(spec["first"]), cls.from_dict(spec["second"]))
        return InducedCompressor.from_budget(
            spec.get("k"), spec.get("split", 0.5), spec.get("second", "rand_k")
        ).spec


@dataclass(frozen=True)
class InducedCompressor:
    """
    C(x) = C1(x) + C2(x - C1(x)) with C1 contractive (scaling 1) and C2
    unbiased; the result is unbiased.
    """

    c1: CompressorSpec
    c2: CompressorSpec

    def __post_init__(self):
        # delegate the class checks to CompressorSpec
        self.spec

    @property
    def spec(self) -> CompressorSpec:
        return CompressorSpec.induced(self.c1, self.c2)

    @classmethod
    def from_spec(cls, spec: CompressorSpec) -> "InducedCompressor":
        if spec.kind != CompressorKind.INDUCED:
            raise ParameterError(f"Not an induced spec: {spec.label}.")
        return cls(*spec.inner)  # type: ignore[misc]

    @classmethod
    def from_budget(
        cls, k: Optional[int], split: float = 0.5, second: str = "rand_k"
    ) -> "InducedCompressor":
        """
        Split a total budget ``k`` into Top-k1 followed by a budgeted unbiased
        operator with k2 = k - k1 (k1 = round(split * k)).
        """
        if k is None or int(k) != k or k < 2:
            raise ParameterError(f"Induced budget split requires k >= 2, got {k}.")
        if not 0 < split < 1:
            raise ParameterError(f"Budget split must lie in (0, 1), got {split}.")
        k1 = min(max(int(round(split * k)), 1), int(k) - 1)
        kind = CompressorKind(second)
        if kind not in BUDGETED_KINDS or kind not in UNBIASED_KINDS:
            raise ParameterError(f"Second stage for a budget split must be rand_k or wangni, got {second}.")
        return cls(CompressorSpec.top_k(k1), CompressorSpec(kind, int(k) - k1))
