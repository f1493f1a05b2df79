"""Immutable, ordered sets of named parameter tensors.

A ParameterSet is the unit exchanged between server and clients and the
input to aggregation. Name order is the model's canonical manifest order
and defines the serialized layout.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np


class ParameterSet:
    """Ordered name -> float64 array snapshot. Arrays are read-only copies."""

    __slots__ = ("_arrays",)

    def __init__(self, items: Iterable[tuple[str, np.ndarray]]) -> None:
        arrays: dict[str, np.ndarray] = {}
        for name, arr in items:
            if name in arrays:
                raise ValueError(f"duplicate parameter name '{name}'")
            a = np.array(arr, dtype=np.float64, copy=True)
            a.setflags(write=False)
            arrays[name] = a
        self._arrays = arrays

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._arrays.keys())

    def manifest(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        """Ordered (name, shape) pairs; the serialization/aggregation key."""
        return tuple((name, arr.shape) for name, arr in self._arrays.items())

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._arrays.items())

    def __eq__(self, other: object) -> bool:
        """Bit-exact equality: same names, same order, same values."""
        if not isinstance(other, ParameterSet):
            return NotImplemented
        if self.names != other.names:
            return False
        return all(np.array_equal(self._arrays[n], other._arrays[n]) for n in self._arrays)

    __hash__ = None  # type: ignore[assignment]

    def quantize32(self) -> "ParameterSet":
        """Round every value to its nearest float32 (the wire precision).

        Idempotent; applied by the protocol before any parameter transfer
        and by centralized baselines used in equivalence tests.
        """
        return ParameterSet(
            (name, arr.astype(np.float32).astype(np.float64)) for name, arr in self.items()
        )

    def n_values(self) -> int:
        return sum(arr.size for arr in self._arrays.values())
