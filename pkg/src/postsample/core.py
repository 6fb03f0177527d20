"""Shared domain types: signals, observation masks and the seeded random stream."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class PostsampleError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PostsampleError, ValueError):
    pass


class NonFiniteError(PostsampleError, ValueError):
    def __init__(self, index: int, value: float):
        super().__init__(f"non-finite value {value!r} at flat index {index}")
        self.index = index
        self.value = value


class DivergenceError(PostsampleError, FloatingPointError):
    """A Langevin iterate left the finite, bounded region."""

    def __init__(self, level: int, step: int, chain: int | None = None, value: float = math.nan):
        where = f"level {level}, step {step}"
        if chain is not None:
            where += f", chain {chain}"
        super().__init__(f"chain diverged at {where} (|x| = {abs(value):.3g})")
        self.level = level
        self.step = step
        self.chain = chain
        self.value = value


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signal:
    """Flat float64 pixel vector with an explicit (height, width, channels) grid.

    Values are stored in row-major (h, w, c) order. Nothing is clamped here;
    clamping to [0, 1] happens only when exporting images.
    """

    values: np.ndarray
    shape: tuple[int, int, int]

    def __post_init__(self):
        if len(self.shape) != 3 or any(int(s) != s or s <= 0 for s in self.shape):
            raise ShapeError(f"shape must be three positive integers, got {self.shape!r}")
        values = np.asarray(self.values, dtype=np.float64).ravel()
        h, w, c = (int(s) for s in self.shape)
        if values.size != h * w * c:
            raise ShapeError(
                f"shape {(h, w, c)} needs {h * w * c} values, got {values.size}"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteError(int(bad[0]), float(values[bad[0]]))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "shape", (h, w, c))

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]

    @property
    def channels(self) -> int:
        return self.shape[2]

    def grid(self) -> np.ndarray:
        """Read-only (h, w, c) view of the values."""
        return self.values.reshape(self.shape)

    def with_values(self, values) -> "Signal":
        return Signal(values, self.shape)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.shape, self.values.tobytes()))

    def __repr__(self):
        return f"Signal(shape={self.shape}, mean={self.values.mean():.4g})"


def make_signal(values: Iterable[float], shape: Sequence[int]) -> Signal:
    if not isinstance(values, np.ndarray):
        values = list(values)
    return Signal(np.asarray(values, dtype=np.float64), tuple(shape))


def signal_from_array(arr: np.ndarray) -> Signal:
    """Wrap an (h, w), (h, w, c) or flat (d,) array; flat arrays become (d, 1, 1)."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        return Signal(arr, (arr.size, 1, 1))
    if arr.ndim == 2:
        return Signal(arr.ravel(), (arr.shape[0], arr.shape[1], 1))
    if arr.ndim == 3:
        return Signal(arr.ravel(), arr.shape)
    raise ShapeError(f"cannot interpret array of ndim {arr.ndim} as a signal")


@dataclass(frozen=True, eq=False)
class Mask:
    """The set of observed flat indices into a signal of length ``total_len``."""

    observed: np.ndarray
    total_len: int

    def __post_init__(self):
        if int(self.total_len) <= 0:
            raise ShapeError("total_len must be positive")
        obs = np.asarray(self.observed, dtype=np.int64).ravel()
        if obs.size and (obs.min() < 0 or obs.max() >= self.total_len):
            raise ShapeError(f"mask index out of range for length {self.total_len}")
        uniq = np.unique(obs)
        if uniq.size != obs.size:
            raise ShapeError("mask contains duplicate indices")
        uniq.setflags(write=False)
        object.__setattr__(self, "observed", uniq)
        object.__setattr__(self, "total_len", int(self.total_len))

    @classmethod
    def from_bool(cls, flags) -> "Mask":
        flags = np.asarray(flags, dtype=bool).ravel()
        return cls(np.flatnonzero(flags), flags.size)

    @classmethod
    def full(cls, n: int) -> "Mask":
        return cls(np.arange(n), n)

    @classmethod
    def empty(cls, n: int) -> "Mask":
        return cls(np.array([], dtype=np.int64), n)

    def as_bool(self) -> np.ndarray:
        out = np.zeros(self.total_len, dtype=bool)
        out[self.observed] = True
        return out

    @property
    def complement(self) -> np.ndarray:
        return np.flatnonzero(~self.as_bool())

    @property
    def n_observed(self) -> int:
        return int(self.observed.size)

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.total_len == other.total_len and np.array_equal(self.observed, other.observed)

    def __hash__(self):
        return hash((self.total_len, self.observed.tobytes()))


RNG_ALGORITHM = "pcg64/box-muller"


class RandomStream:
    """Seeded source of uniform and standard normal draws.

    Uniforms come from numpy's PCG64 bit generator (``Generator.random``, 53-bit
    doubles in [0, 1)). Normals use the Box-Muller transform on consecutive
    uniform pairs (u1, u2)::

        r = sqrt(-2 log(1 - u1));  z0 = r cos(2 pi u2);  z1 = r sin(2 pi u2)

    emitted in the order z0, z1. An unused z1 is kept for the next call, so
    the normal sequence does not depend on how draws are chunked.

    ``stream`` selects an independent sub-stream of the same seed (stream 0 is
    plain ``PCG64(seed)``); chains use ``seed + chain_index`` on stream 0.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int, stream: int = 0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.stream = int(stream)
        spawn_key = (self.stream,) if self.stream else ()
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))
        self._spare: float | None = None

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream={self.stream})"

    def uniform(self, n: int) -> np.ndarray:
        return self._gen.random(int(n))

    def normal(self, n: int) -> np.ndarray:
        n = int(n)
        out = np.empty(n)
        if n == 0:
            return out
        start = 0
        if self._spare is not None:
            out[0] = self._spare
            self._spare = None
            start = 1
        need = n - start
        pairs = (need + 1) // 2
        if pairs:
            u = self._gen.random(2 * pairs).reshape(pairs, 2)
            r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
            theta = 2.0 * np.pi * u[:, 1]
            z = np.empty((pairs, 2))
            z[:, 0] = r * np.cos(theta)
            z[:, 1] = r * np.sin(theta)
            z = z.ravel()
            out[start:] = z[:need]
            if z.size > need:
                self._spare = float(z[-1])
        return out


def gaussian_vector(stream: RandomStream, n: int) -> np.ndarray:
    if n <= 0:
        raise ValueError("length must be positive")
    return stream.normal(n)


def chain_streams(base_seed: int, n_chains: int) -> list[RandomStream]:
    """One stream per chain, seeded ``base_seed + chain_index``."""
    return [RandomStream(base_seed + c) for c in range(n_chains)]
