"""Labeled batches keyed by stream position, with reproducible Rademacher bits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(x):
    """Vectorised splitmix64 finaliser on ``uint64`` arrays."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def rademacher_bits(seed: int, indices) -> np.ndarray:
    """Signs in {-1, +1} determined by ``(seed, index)`` alone."""
    idx = np.asarray(indices, dtype=np.uint64)
    key = splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        z = splitmix64(idx ^ key)
    return np.where((z >> np.uint64(63)) == 1, 1.0, -1.0)


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    """Ordered labeled points ``(stream index, x, y)``.

    Parameters
    ----------
    indices : array of int
        Strictly increasing stream positions.
    xs : array
        Points; atom indices for discrete problems, reals in ``[0, 1]`` or
        rows of features otherwise.
    ys : array of {-1, +1}
    seed : int
        Key for the Rademacher bits, see :attr:`xi`.
    """

    indices: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    seed: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        xs = np.asarray(self.xs)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if not (len(idx) == len(xs) == len(ys)):
            raise ValueError("indices, xs and ys must have equal length")
        if len(idx) > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("stream indices must be strictly increasing")
        if np.any(np.abs(ys) != 1):
            raise ValueError("labels must be +1 or -1")
        for arr in (idx, xs, ys):
            arr.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def empty(cls, seed: int = 0, dim: int | None = None, dtype=float) -> "LabeledBatch":
        shape = (0,) if dim is None else (0, dim)
        return cls(np.zeros(0, np.int64), np.zeros(shape, dtype), np.zeros(0), seed)

    @classmethod
    def from_pairs(cls, pairs, seed: int = 0) -> "LabeledBatch":
        """Build from ``(x, y)`` pairs, indexed ``1, 2, ...``."""
        pairs = list(pairs)
        xs = np.array([p[0] for p in pairs]) if pairs else np.zeros(0)
        ys = np.array([p[1] for p in pairs], dtype=float)
        return cls(np.arange(1, len(pairs) + 1), xs, ys, seed)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def xi(self) -> np.ndarray:
        """Rademacher bits of the batch, one per stream index."""
        return rademacher_bits(self.seed, self.indices)

    def __eq__(self, other):
        if not isinstance(other, LabeledBatch):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
        )

    __hash__ = None
