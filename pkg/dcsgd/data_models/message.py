#! /usr/bin/env python

"""
Compressed messages: the payloads a worker sends to the master, their exact
bit cost on the wire model and their canonical byte layout.
"""

from __future__ import annotations
from dataclasses import dataclass
from math import ceil, log2
from typing import Union, Tuple

import numpy as np

from dcsgd.types import Array, DenseVector
from dcsgd.exceptions import MessageFormatError
from dcsgd.defaults import (
    VALUE_BITS,
    TERNARY_SIGN_BITS,
    MESSAGE_TAG_SPARSE,
    MESSAGE_TAG_TERNARY,
    MESSAGE_TAG_COMPOSITE,
)

SPARSE_ENTRY = np.dtype([("index", "<u4"), ("value", "<f4")])


def index_bits(dim: int) -> int:
    """Bits needed to address one of ``dim`` coordinates."""
    return int(ceil(log2(dim))) if dim > 1 else 0


@dataclass(frozen=True, eq=False)
class SparseEntries:
    """Strictly increasing coordinate indices with their values."""

    indices: Array
    values: Array

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class TernaryBlock:
    """One shared scale and a sign code in {-1, 0, 1} per coordinate."""

    scale: float
    signs: Array


@dataclass(frozen=True, eq=False)
class Composite:
    first: "CompressedMessage"
    second: "CompressedMessage"


Payload = Union[SparseEntries, TernaryBlock, Composite]


@dataclass(frozen=True, eq=False)
class CompressedMessage:
    payload: Payload
    dim: int

    @classmethod
    def sparse(cls, indices: Array, values: Array, dim: int) -> "CompressedMessage":
        """Build a sparse message, dropping entries whose value is exactly zero."""
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        order = np.argsort(indices, kind="stable")
        indices, values = indices[order], values[order]
        keep = values != 0
        return cls(SparseEntries(indices[keep], values[keep]), int(dim))

    @classmethod
    def empty(cls, dim: int) -> "CompressedMessage":
        return cls.sparse(np.zeros(0, dtype=np.int64), np.zeros(0), dim)

    @classmethod
    def ternary(cls, scale: float, signs: Array) -> "CompressedMessage":
        signs = np.asarray(signs, dtype=np.int8)
        return cls(TernaryBlock(float(scale), signs), int(signs.size))

    @classmethod
    def composite(
        cls, first: "CompressedMessage", second: "CompressedMessage"
    ) -> "CompressedMessage":
        if first.dim != second.dim:
            raise MessageFormatError(
                f"Composite parts have different dimensions: {first.dim} != {second.dim}."
            )
        return cls(Composite(first, second), first.dim)

    def __repr__(self) -> str:
        p = self.payload
        if isinstance(p, SparseEntries):
            entries = ", ".join(
                f"({i}, {v:g})" for i, v in zip(p.indices.tolist(), p.values.tolist())
            )
            return f"Sparse[dim={self.dim}]{{{entries}}}"
        if isinstance(p, TernaryBlock):
            return f"Ternary[dim={self.dim}](scale={p.scale:g}, signs={p.signs.tolist()})"
        return f"Composite[dim={self.dim}]({p.first!r}, {p.second!r})"

    @property
    def kind(self) -> str:
        return type(self.payload).__name__

    @property
    def bit_cost(self) -> int:
        """
        Size of the message on the wire model.

        Sparse: entries * (ceil(log2 d) + 32); ternary: 32 + 2 d;
        composite: sum of the parts.
        """
        p = self.payload
        if isinstance(p, SparseEntries):
            return len(p) * (index_bits(self.dim) + VALUE_BITS)
        if isinstance(p, TernaryBlock):
            return VALUE_BITS + TERNARY_SIGN_BITS * self.dim
        return p.first.bit_cost + p.second.bit_cost

    def validate(self) -> None:
        """Raise :class:`MessageFormatError` if the payload is inconsistent."""
        if self.dim < 1:
            raise MessageFormatError(f"Message dimension must be positive, got {self.dim}.")
        p = self.payload
        if isinstance(p, SparseEntries):
            if len(p.indices) != len(p.values):
                raise MessageFormatError("Sparse indices and values differ in length.")
            if len(p) == 0:
                return
            if p.indices.min() < 0 or p.indices.max() >= self.dim:
                raise MessageFormatError(
                    f"Sparse index out of range for dimension {self.dim}."
                )
            if (np.diff(p.indices) <= 0).any():
                raise MessageFormatError("Sparse indices are not strictly increasing.")
        elif isinstance(p, TernaryBlock):
            if p.signs.size != self.dim:
                raise MessageFormatError("Ternary sign code does not match dimension.")
            if not np.isin(p.signs, (-1, 0, 1)).all():
                raise MessageFormatError("Ternary sign code outside {-1, 0, 1}.")
            if not p.scale >= 0:
                raise MessageFormatError("Ternary scale must be non-negative.")
        else:
            if p.first.dim != self.dim or p.second.dim != self.dim:
                raise MessageFormatError("Composite parts do not share the dimension.")
            p.first.validate()
            p.second.validate()

    def to_dense(self) -> DenseVector:
        self.validate()
        p = self.payload
        if isinstance(p, SparseEntries):
            out = np.zeros(self.dim)
            out[p.indices] = p.values
            return out
        if isinstance(p, TernaryBlock):
            return p.scale * p.signs.astype(float)
        return p.first.to_dense() + p.second.to_dense()

    def to_bytes(self) -> bytes:
        """
        Canonical little-endian layout.

        Sparse: tag u8, dim u32, count u32, count x (index u32, value f32).
        Ternary: tag u8, dim u32, scale f32, dim x sign i8.
        Composite: tag u8, then both parts.
        """
        p = self.payload
        if isinstance(p, SparseEntries):
            entries = np.zeros(len(p), dtype=SPARSE_ENTRY)
            entries["index"] = p.indices
            entries["value"] = p.values
            return (
                np.uint8(MESSAGE_TAG_SPARSE).tobytes()
                + np.array([self.dim, len(p)], dtype="<u4").tobytes()
                + entries.tobytes()
            )
        if isinstance(p, TernaryBlock):
            return (
                np.uint8(MESSAGE_TAG_TERNARY).tobytes()
                + np.array([self.dim], dtype="<u4").tobytes()
                + np.array([p.scale], dtype="<f4").tobytes()
                + p.signs.astype("<i1").tobytes()
            )
        return (
            np.uint8(MESSAGE_TAG_COMPOSITE).tobytes()
            + p.first.to_bytes()
            + p.second.to_bytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedMessage":
        message, offset = _parse(data, 0)
        if offset != len(data):
            raise MessageFormatError(f"{len(data) - offset} trailing bytes after message.")
        message.validate()
        return message


def _parse(data: bytes, offset: int) -> Tuple[CompressedMessage, int]:
    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise MessageFormatError("Truncated message.")
        chunk = data[offset : offset + n]
        offset += n
        return chunk

    tag = take(1)[0]
    if tag == MESSAGE_TAG_SPARSE:
        dim, count = np.frombuffer(take(8), dtype="<u4").tolist()
        entries = np.frombuffer(take(count * SPARSE_ENTRY.itemsize), dtype=SPARSE_ENTRY)
        payload: Payload = SparseEntries(
            entries["index"].astype(np.int64), entries["value"].astype(float)
        )
        return CompressedMessage(payload, int(dim)), offset
    if tag == MESSAGE_TAG_TERNARY:
        dim = int(np.frombuffer(take(4), dtype="<u4")[0])
        scale = float(np.frombuffer(take(4), dtype="<f4")[0])
        signs = np.frombuffer(take(dim), dtype="<i1").astype(np.int8)
        return CompressedMessage(TernaryBlock(scale, signs), dim), offset
    if tag == MESSAGE_TAG_COMPOSITE:
        first, offset = _parse(data, offset)
        second, offset = _parse(data, offset)
        if first.dim != second.dim:
            raise MessageFormatError("Composite parts do not share the dimension.")
        return CompressedMessage(Composite(first, second), first.dim), offset
    raise MessageFormatError(f"Unknown payload tag {tag}.")
