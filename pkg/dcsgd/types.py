"""
Specific types or type aliases used in the library.
"""

from __future__ import annotations
from typing import Union, TypeVar, Sequence
import pathlib
import argparse

import numpy  # type: ignore
import pandas  # type: ignore


class Path(type(pathlib.Path())):  # type: ignore[misc]
    """Platform path type; output locations and config files go through it."""


GenericType = TypeVar("GenericType")

# type aliasing (done with Union to distinguish from other declared variables)
Args = Union[argparse.Namespace]
Array = Union[numpy.ndarray]
DenseVector = Union[numpy.ndarray]
Matrix = Union[numpy.ndarray]
Generator = Union[numpy.random.Generator]
Series = Union[pandas.Series]
DataFrame = Union[pandas.DataFrame]
VectorLike = Union[numpy.ndarray, Sequence[float]]
