#! /usr/bin/env python

"""
Per-worker state, stepsize/weight schedules and the record of one run.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from math import ceil
from typing import Optional, List, Dict, Any

import numpy as np
import pandas as pd

from dcsgd.defaults import TRACE_COLUMNS
from dcsgd.exceptions import ParameterError
from dcsgd.types import Array, DataFrame, DenseVector, Path


class Mode(str, Enum):
    PLAIN = "plain"
    EF = "ef"
    PP = "pp"


@dataclass
class WorkerState:
    """
    What a worker keeps between iterations.

    Only error-feedback workers own a persistent vector (``error``);
    plain and partial-participation workers are stateless.
    """

    node_index: int
    error: Optional[DenseVector] = None

    def __repr__(self) -> str:
        return f"Worker {self.node_index} ({self.mode.value})"

    @property
    def mode(self) -> Mode:
        return Mode.PLAIN if self.error is None else Mode.EF

    def persistent_vectors(self) -> List[DenseVector]:
        return [v for v in self.__dict__.values() if isinstance(v, np.ndarray)]


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    TWO_PHASE = "two_phase"


@dataclass(frozen=True)
class Schedule:
    """
    Stepsizes eta^k and output weights w^k.

    ``constant``: eta^k = eta and w^k = 1.
    ``two_phase`` (a, d, T): if T <= d/a, eta^k = 1/d and
    w^k = (1 - a/d)^-(k+1); otherwise with kappa = 2d/a and t0 = ceil(T/2),
    eta^k = 1/d and w^k = 0 for k < t0, then eta^k = 2 / (a (kappa + k - t0))
    and w^k = (kappa + k - t0)^2.
    """

    kind: ScheduleKind
    eta: Optional[float] = None
    a: Optional[float] = None
    d: Optional[float] = None
    T: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.kind == ScheduleKind.CONSTANT:
            if self.eta is None or not self.eta > 0 or not np.isfinite(self.eta):
                raise ParameterError(f"Constant stepsize must be positive, got {self.eta}.")
            return
        if self.a is None or not self.a > 0:
            raise ParameterError(
                f"Two-phase schedule needs a > 0 (strong quasi-convexity), got a={self.a}."
            )
        if self.d is None or not self.d > 0:
            raise ParameterError(f"Two-phase schedule needs d > 0, got d={self.d}.")
        if self.T is None or int(self.T) != self.T or self.T < 0:
            raise ParameterError(f"Horizon T must be a non-negative integer, got {self.T}.")
        object.__setattr__(self, "T", int(self.T))
        if self.short and not self.a < self.d:
            raise ParameterError(f"Need a < d for geometric weights, got a={self.a}, d={self.d}.")

    def __repr__(self) -> str:
        if self.kind == ScheduleKind.CONSTANT:
            return f"Schedule(constant, eta={self.eta:g})"
        return f"Schedule(two_phase, a={self.a:g}, d={self.d:g}, T={self.T})"

    @classmethod
    def constant(cls, eta: float) -> "Schedule":
        return cls(ScheduleKind.CONSTANT, eta=float(eta))

    @classmethod
    def two_phase(cls, a: float, d: float, T: int) -> "Schedule":
        return cls(ScheduleKind.TWO_PHASE, a=float(a), d=float(d), T=T)

    @property
    def short(self) -> bool:
        """Horizon short enough for the constant-stepsize branch."""
        return self.T <= self.d / self.a  # type: ignore[operator]

    @property
    def kappa(self) -> float:
        return 2 * self.d / self.a  # type: ignore[operator]

    @property
    def t0(self) -> int:
        return int(ceil(self.T / 2))  # type: ignore[operator]

    def stepsize(self, k: int) -> float:
        if self.kind == ScheduleKind.CONSTANT:
            return self.eta  # type: ignore[return-value]
        if self.short or k < self.t0:
            return 1 / self.d  # type: ignore[operator]
        return 2 / (self.a * (self.kappa + k - self.t0))  # type: ignore[operator]

    def weight(self, k: int) -> float:
        if self.kind == ScheduleKind.CONSTANT:
            return 1.0
        if self.short:
            return (1 - self.a / self.d) ** -(k + 1)  # type: ignore[operator]
        if k < self.t0:
            return 0.0
        return (self.kappa + k - self.t0) ** 2

    def steps(self, T: int) -> DataFrame:
        """Table of (k, eta, w) for k = 0..T."""
        k = np.arange(T + 1)
        return pd.DataFrame(
            {
                "k": k,
                "eta": [self.stepsize(i) for i in k],
                "w": [self.weight(i) for i in k],
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        d = {"kind": self.kind.value}
        for key in ["eta", "a", "d", "T"]:
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    @classmethod
    def from_dict(cls, spec: Dict[str, Any]) -> "Schedule":
        return cls(**spec)


@dataclass(eq=False)
class RunRecord:
    """
    Trace of one run: rows k = 0..T (fewer if it diverged), the output point
    sampled with probability w^k / W^T and the divergence flag.

    ``bits_up`` of row k is the uplink cost of the step that produced x^k.
    """

    trace: DataFrame
    output_point: DenseVector
    output_index: int
    diverged: bool
    label: str = "run"
    seed: int = 0
    iterates: Optional[Array] = field(default=None, repr=False)

    def __repr__(self) -> str:
        status = "diverged" if self.diverged else "completed"
        return f"Run '{self.label}' (seed {self.seed}) {status} after {self.iterations} iterations"

    @property
    def iterations(self) -> int:
        return int(self.trace["k"].iloc[-1])

    @property
    def total_bits(self) -> int:
        return int(self.trace["bits_up"].sum())

    @property
    def final_gap(self) -> float:
        return float(self.trace["f_gap"].iloc[-1])

    def iterations_to(self, target: float) -> Optional[int]:
        """First k with f_gap <= target, if any."""
        hits = self.trace.loc[self.trace["f_gap"] <= target, "k"]
        return int(hits.iloc[0]) if not hits.empty else None

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        try:
            self.trace[TRACE_COLUMNS].to_csv(path, index=False)
        except OSError as e:
            raise OSError(f"Could not write run trace to '{path}': {e}") from e
        return path
