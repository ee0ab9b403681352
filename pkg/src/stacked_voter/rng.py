"""Counter-based random streams.

A stream is identified by ``(seed, stream_id)``. Draw number ``i`` is a pure
function of ``(key, i)``: the SplitMix64 finalizer applied to
``key + (i + 1) * GOLDEN``. This is the output function of Java's
SplittableRandom used as a counter hash, so any draw can be recomputed
without replaying the stream, and numba kernels can carry just
``(key, cursor)``.

For vectorized non-uniform variates (binomial, gamma, ...) a stream also
hands out a numpy ``Generator`` backed by Philox keyed on the same pair.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0

DEFAULT_SEED = 20240517


def default_seed() -> int:
    """Seed from ``STACKED_VOTER_SEED`` if set, else the package default."""
    env = os.environ.get("STACKED_VOTER_SEED")
    return int(env) if env else DEFAULT_SEED


def _mix64_py(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id: int) -> int:
    """64-bit key for a ``(seed, stream_id)`` pair."""
    a = _mix64_py(int(seed) & _MASK64)
    return _mix64_py(a ^ _mix64_py((int(stream_id) + 0x632BE59BD9B4E019) & _MASK64))


@nb.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def uniform_at(key, i):
    """Uniform double in [0, 1) for draw ``i`` of stream ``key``."""
    z = mix64(key + (i + np.uint64(1)) * GOLDEN)
    return float(z >> np.uint64(11)) * _INV_2_53


@nb.njit
def _fill_uniforms(key, start, out):
    for k in range(out.size):
        out[k] = uniform_at(key, np.uint64(start + k))


@dataclass
class EventStream:
    """Replayable uniform source. ``cursor`` counts draws consumed so far."""

    seed: int
    stream_id: int = 0
    cursor: int = 0

    def __post_init__(self):
        self.key = np.uint64(stream_key(self.seed, self.stream_id))

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.float64)
        _fill_uniforms(self.key, np.uint64(self.cursor), out)
        self.cursor += int(n)
        return out

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def child(self, index: int) -> "EventStream":
        """Independent stream derived from this one (not from the cursor)."""
        return EventStream(self.seed, stream_key(self.stream_id, index + 1))

    def generator(self) -> np.random.Generator:
        """numpy Generator on Philox keyed by ``(seed, stream_id)``."""
        key = np.array([int(self.seed) & _MASK64, int(self.stream_id) & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))
