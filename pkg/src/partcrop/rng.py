"""Portable, counter-based pseudo-random streams.

All randomness in the toolkit flows through `Stream`, a counter-based
generator built on the SplitMix64 output function (Steele, Lea & Flood 2014):

    out(i) = mix64(base + i * 0x9E3779B97F4A7C15)

where `mix64` is the standard SplitMix64 finalizer

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

and `base` is the first 8 bytes (little-endian) of the BLAKE2b digest of the
stream key.  Because the i-th output is a pure function of (key, i), streams
can be re-derived anywhere, split per image without coordination, and
reproduced exactly by a reimplementation in any language.

Floats use the top 53 bits: uniform = (out >> 11) * 2^-53 in [0, 1).
Normal deviates use the Box-Muller transform on open-interval uniforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1
_INV_2_53 = float(2.0**-53)

KeyPart = int | str | bytes


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_base(*key_parts: KeyPart) -> int:
    """Map an arbitrary key tuple to a 64-bit stream base via BLAKE2b."""
    h = hashlib.blake2b(digest_size=8)
    for part in key_parts:
        if isinstance(part, int):
            raw = (part & _U64_MASK).to_bytes(8, "little")
        elif isinstance(part, str):
            raw = part.encode("utf-8")
        elif isinstance(part, bytes):
            raw = part
        else:
            raise TypeError(f"unsupported key part type: {type(part)!r}")
        h.update(len(raw).to_bytes(4, "little"))
        h.update(raw)
    return int.from_bytes(h.digest(), "little")


class Stream:
    """A deterministic random stream identified by its key tuple.

    Consecutive draws advance an internal counter; `at(i)` style random access
    is available through `raw_at`. Two streams with the same key always
    produce the same sequence.
    """

    def __init__(self, *key_parts: KeyPart):
        self._base = np.uint64(derive_base(*key_parts))
        self._counter = 0

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._base + idx * _GOLDEN)

    def raw_at(self, index: int) -> int:
        """Counter-indexed access without advancing the stream."""
        with np.errstate(over="ignore"):
            z = self._base + np.uint64((index + 1) & _U64_MASK) * _GOLDEN
            return int(_mix64(np.uint64(z)))

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def uniform_open(self, n: int) -> np.ndarray:
        """n doubles uniform on (0, 1]; safe under log()."""
        return ((self._raw(n) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53

    def uniform_range(self, lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * self.uniform(n)

    def normal(self, n: int) -> np.ndarray:
        """n standard-normal doubles via Box-Muller on interleaved uniforms."""
        pairs = (n + 1) // 2
        bits = (self._raw(2 * pairs) >> np.uint64(11)).astype(np.float64)
        u1 = (bits[0::2] + 1.0) * _INV_2_53  # (0, 1], safe under log
        u2 = bits[1::2] * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers(self, lo: int, hi: int, n: int) -> np.ndarray:
        """n integers uniform on the inclusive range [lo, hi]."""
        span = hi - lo + 1
        if span <= 0:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        return lo + np.floor(self.uniform(n) * span).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """A seeded permutation of range(n), computed as an argsort of uniforms."""
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, p: float) -> bool:
        """Single Bernoulli(p) draw."""
        return bool(self.uniform(1)[0] < p)


def batch_normal(bases: np.ndarray, n: int) -> np.ndarray:
    """Standard-normal draws for many streams at once.

    Row k equals Stream-with-base-k reading n normals from a fresh counter,
    i.e. batch_normal([derive_base(*key)], n)[0] == Stream(*key).normal(n).
    """
    bases = np.asarray(bases, dtype=np.uint64).reshape(-1, 1)
    pairs = (n + 1) // 2
    idx = np.arange(1, 2 * pairs + 1, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        raw = _mix64(bases + idx * _GOLDEN)
    bits = (raw >> np.uint64(11)).astype(np.float64)
    u1 = (bits[:, 0::2] + 1.0) * _INV_2_53
    u2 = bits[:, 1::2] * _INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty((bases.shape[0], 2 * pairs), dtype=np.float64)
    out[:, 0::2] = r * np.cos(theta)
    out[:, 1::2] = r * np.sin(theta)
    return out[:, :n]
