"""Counter-based splittable random number streams.

Every stream is identified by a (master_seed, stream_index) pair and
produces its outputs by applying the SplitMix64 finalizer to
``key + (counter+1) * GOLDEN``.  Because the n-th output is a pure
function of (key, n), streams support random access, independent
substreams by index, and bit-identical replay on any platform —
no hidden state beyond the counter.

All arithmetic is modulo 2^64.  The helpers below accept either Python
ints or numpy uint64 arrays so the same generator drives both the
scalar walk code and the vectorized batch engines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xD1B54A32D192ED03

# float in [0, 1) from the top 53 bits
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def stream_key(master_seed: int, stream_index: int) -> int:
    """Derive the 64-bit key of stream `stream_index` under `master_seed`."""
    return mix64(mix64(master_seed & _MASK) ^ mix64((stream_index ^ _STREAM_SALT) & _MASK))


def stream_key_array(master_seed: int, stream_indices: np.ndarray) -> np.ndarray:
    """Vectorized stream_key for a uint64 array of stream indices."""
    lhs = np.uint64(mix64(master_seed & _MASK))
    rhs = mix64_array(stream_indices.astype(np.uint64) ^ np.uint64(_STREAM_SALT))
    return mix64_array(np.asarray(lhs ^ rhs, dtype=np.uint64))


def stream_key_pairs(master_seeds: np.ndarray, stream_indices: np.ndarray) -> np.ndarray:
    """Vectorized stream_key with per-element master seeds (both uint64 arrays)."""
    lhs = mix64_array(master_seeds.astype(np.uint64))
    rhs = mix64_array(stream_indices.astype(np.uint64) ^ np.uint64(_STREAM_SALT))
    return mix64_array(lhs ^ rhs)


def raw64(key: int, counter: int) -> int:
    """The counter-th 64-bit output of the stream with the given key."""
    return mix64((key + ((counter + 1) * _GOLDEN)) & _MASK)


def raw64_array(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Vectorized raw64: one output per (key, counter) pair."""
    z = keys.astype(np.uint64) + (counters.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
    return mix64_array(z)


def to_unit(value):
    """Map 64-bit outputs to floats in [0, 1) using the top 53 bits."""
    if isinstance(value, np.ndarray):
        return (value >> np.uint64(11)).astype(np.float64) * _INV53
    return (value >> 11) * _INV53


@dataclass
class RngStream:
    """One reproducible stream of uniforms.

    Identical (master_seed, stream_index) pairs reproduce identical draw
    sequences; distinct indices give statistically independent streams.
    The instance keeps only a cursor into the counter sequence, so copies
    made with `.at()` can replay from any position.
    """

    master_seed: int
    stream_index: int = 0
    counter: int = 0
    _key: int = field(init=False, repr=False, default=0)

    def __post_init__(self):
        self._key = stream_key(self.master_seed, self.stream_index)

    @property
    def key(self) -> int:
        return self._key

    def next_raw(self) -> int:
        value = raw64(self._key, self.counter)
        self.counter += 1
        return value

    def next_uniform(self) -> float:
        """Next float in [0, 1)."""
        return to_unit(self.next_raw())

    def next_below(self, n: int) -> int:
        """Next integer uniform on {0, ..., n-1} (modulo; bias ~ n/2^64)."""
        return self.next_raw() % n

    def substream(self, index: int) -> "RngStream":
        """Independent child stream; children of distinct indices never collide."""
        return RngStream(self._key, index)

    def at(self, counter: int) -> "RngStream":
        """A copy of this stream positioned at the given counter."""
        clone = RngStream(self.master_seed, self.stream_index)
        clone.counter = counter
        return clone

    def identity(self) -> dict:
        return {"master_seed": int(self.master_seed), "stream_index": int(self.stream_index)}


def poisson_batch(lam: float, uniforms: np.ndarray) -> np.ndarray:
    """Vectorized Poisson inversion: one draw per uniform, shared rate."""
    if lam < 0:
        raise ValueError("Poisson rate must be nonnegative")
    if lam == 0:
        return np.zeros(len(uniforms), dtype=np.int64)
    if lam > 600:
        pieces = int(np.ceil(lam / 600.0))
        out = np.zeros(len(uniforms), dtype=np.int64)
        # derive piece uniforms deterministically from the given ones
        vals = (uniforms * (1 << 53)).astype(np.uint64)
        for j in range(pieces):
            sub = to_unit(mix64_array(vals + np.uint64(j + 1)))
            out += poisson_batch(lam / pieces, sub)
        return out
    kmax = int(lam + 12 * np.sqrt(lam) + 30)
    ks = np.arange(kmax + 1, dtype=np.float64)
    logpmf = ks * np.log(lam) - lam - np.cumsum(np.concatenate([[0.0], np.log(np.maximum(ks[1:], 1.0))]))
    cdf = np.cumsum(np.exp(logpmf))
    return np.searchsorted(cdf, uniforms, side="right").astype(np.int64)
