#! /usr/bin/env python

"""
Synthetic finite-sum problems built from quadratic node functions.
"""

from __future__ import annotations
import json
from dataclasses import dataclass, field
from typing import List, Optional, Dict, Any

import numpy as np

from dcsgd.exceptions import ParameterError
from dcsgd.types import Array, Matrix, DenseVector, Path, VectorLike
from dcsgd.utils import as_dense_vector, encode


@dataclass(frozen=True, eq=False)
class QuadraticNodeFunction:
    """f_i(x) = 1/2 x^T A x + b^T x + c."""

    A: Matrix
    b: Array
    c: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ParameterError(f"Inconsistent shapes: A {A.shape}, b {b.shape}.")
        if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(self.c)):
            raise ParameterError("Quadratic has non-finite coefficients.")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ParameterError("Hessian A must be symmetric.")
        for arr in (A, b):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return int(self.b.size)

    def value(self, x: DenseVector) -> float:
        return float(0.5 * x @ self.A @ x + self.b @ x + self.c)

    def gradient(self, x: DenseVector) -> DenseVector:
        return self.A @ x + self.b

    def to_dict(self) -> Dict[str, Any]:
        return {"A": encode(self.A), "b": encode(self.b), "c": self.c}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "QuadraticNodeFunction":
        return cls(np.asarray(d["A"], dtype=float), np.asarray(d["b"], dtype=float), d.get("c", 0.0))


@dataclass(frozen=True, eq=False)
class ProblemConstants:
    """
    Constants of the finite-sum problem.

    ``L`` is the largest eigenvalue over the node Hessians (expected
    smoothness), ``L_f`` the largest eigenvalue of the average Hessian
    (smoothness of f), ``mu`` the smallest eigenvalue of the average Hessian.
    """

    L: float
    L_f: float
    mu: float
    x_star: DenseVector
    f_star: float
    f_i_star: Array
    node_minimizers: Array
    D: float

    def to_dict(self) -> Dict[str, Any]:
        return encode(self.__dict__)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """
    f(x) = (1/n) sum_i f_i(x) with additive gradient noise of total variance
    ``noise_sigma2`` and the starting point ``x0``.
    """

    nodes: List[QuadraticNodeFunction]
    noise_sigma2: float = 0.0
    x0: Optional[DenseVector] = None
    name: str = "problem"
    constants: "ProblemConstants" = field(init=False, repr=False)

    def __post_init__(self):
        if not self.nodes:
            raise ParameterError("A problem needs at least one node.")
        dims = {node.dim for node in self.nodes}
        if len(dims) != 1:
            raise ParameterError(f"Node functions have different dimensions: {sorted(dims)}.")
        if not self.noise_sigma2 >= 0:
            raise ParameterError(f"Noise variance must be non-negative, got {self.noise_sigma2}.")
        object.__setattr__(self, "nodes", list(self.nodes))
        x0 = np.zeros(self.dim) if self.x0 is None else as_dense_vector(self.x0, self.dim)
        object.__setattr__(self, "x0", x0)
        from dcsgd.problems import problem_constants

        object.__setattr__(self, "constants", problem_constants(self))

    def __repr__(self) -> str:
        return f"Problem '{self.name}' with {self.n} nodes in dimension {self.dim}"

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def dim(self) -> int:
        return self.nodes[0].dim

    @property
    def hessian(self) -> Matrix:
        return np.mean([node.A for node in self.nodes], axis=0)

    @property
    def linear(self) -> Array:
        return np.mean([node.b for node in self.nodes], axis=0)

    def value(self, x: VectorLike) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.mean([node.value(x) for node in self.nodes]))

    def gradient(self, x: VectorLike) -> DenseVector:
        x = np.asarray(x, dtype=float)
        return self.hessian @ x + self.linear

    def f_gap(self, x: VectorLike) -> float:
        return self.value(x) - self.constants.f_star

    def dist2(self, x: VectorLike) -> float:
        return float(((np.asarray(x) - self.constants.x_star) ** 2).sum())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "noise_sigma2": self.noise_sigma2,
            "x0": encode(self.x0),
            "nodes": [node.to_dict() for node in self.nodes],
            "constants": self.constants.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ProblemInstance":
        # stored constants are informative only; they are always recomputed
        return cls(
            nodes=[QuadraticNodeFunction.from_dict(node) for node in d["nodes"]],
            noise_sigma2=d.get("noise_sigma2", 0.0),
            x0=d.get("x0"),
            name=d.get("name", "problem"),
        )

    def to_json(self, path: Path) -> Path:
        path = Path(path)
        with open(path, "w") as handle:
            json.dump(self.to_dict(), handle, indent=2)
        return path

    @classmethod
    def from_json(cls, path: Path) -> "ProblemInstance":
        with open(path) as handle:
            return cls.from_dict(json.load(handle))
