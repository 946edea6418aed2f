"""Seed handling: conversion of user seeds and a sequential bit pool."""

from __future__ import annotations

import hashlib
import sys
from typing import Union

import numpy as np

from .errors import InvalidParameterError, SeedExhaustedError

SeedLike = Union[int, bytes, str]


def seed_to_int(seed: SeedLike) -> int:
    """Interpret a seed as a non-negative integer.

    ``bytes`` are read big-endian, ``str`` is UTF-8 encoded first.
    """
    if isinstance(seed, bool):
        raise InvalidParameterError("seed must be an int, bytes or str, not bool")
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise InvalidParameterError("integer seeds must be non-negative")
        return int(seed)
    if isinstance(seed, str):
        seed = seed.encode()
    if isinstance(seed, (bytes, bytearray)):
        if len(seed) == 0:
            raise InvalidParameterError("seed must be non-empty")
        return int.from_bytes(seed, "big")
    raise InvalidParameterError(f"unsupported seed type {type(seed).__name__}")


def seed_sequence(seed: SeedLike, *spawn_key: int) -> np.random.SeedSequence:
    """Build a numpy ``SeedSequence``; ``spawn_key`` derives independent subseeds."""
    return np.random.SeedSequence(seed_to_int(seed), spawn_key=tuple(int(k) for k in spawn_key))


def rng_from_seed(seed: SeedLike, *spawn_key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *spawn_key)))


def philox_key(seed: SeedLike) -> int:
    """128-bit Philox key obtained as the first 16 bytes of SHA-256 of the seed."""
    if isinstance(seed, str):
        raw = seed.encode()
    elif isinstance(seed, (bytes, bytearray)):
        raw = bytes(seed)
    else:
        value = seed_to_int(seed)
        raw = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
    if not raw:
        raise InvalidParameterError("seed must be non-empty")
    return int.from_bytes(hashlib.sha256(raw).digest()[:16], "big")


class SeedPool:
    """Sequential reader over a finite string of seed bits.

    Bits are consumed in order and never reused. ``take`` returns an
    integer built from the next ``nbits`` bits, most significant first.
    Freshly generated bits can be appended with :meth:`feed` (re-investment
    of extracted output).
    """

    def __init__(self, bits=None):
        self._bits = np.zeros(0, dtype=np.uint8) if bits is None else _as_bits(bits)
        self._cursor = 0
        self.consumed = 0

    @classmethod
    def from_bytes(cls, data: bytes) -> "SeedPool":
        return cls(np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8)))

    @classmethod
    def random(cls, nbits: int, seed: SeedLike) -> "SeedPool":
        """Pool filled with ``nbits`` pseudo-random bits (simulation only)."""
        rng = rng_from_seed(seed, 0x5EED)
        return cls(rng.integers(0, 2, size=int(nbits), dtype=np.uint8))

    @property
    def remaining(self) -> int:
        return self._bits.size - self._cursor

    def take(self, nbits: int) -> int:
        if nbits < 0:
            raise InvalidParameterError("nbits must be non-negative")
        if nbits > self._bits.size - self._cursor:
            raise SeedExhaustedError(
                f"seed pool has {self.remaining} bits left, {nbits} requested"
            )
        chunk = self._bits[self._cursor:self._cursor + nbits]
        self._cursor += nbits
        self.consumed += nbits
        if nbits == 0:
            return 0
        pad = (-nbits) % 8
        packed = np.packbits(np.concatenate([np.zeros(pad, np.uint8), chunk]))
        return int.from_bytes(packed.tobytes(), "big")

    def copy(self) -> "SeedPool":
        """Independent pool holding the unread bits of this one."""
        return SeedPool(self._bits[self._cursor:].copy())

    def feed(self, bits) -> None:
        self._bits = np.concatenate([self._bits[self._cursor:], _as_bits(bits)])
        self._cursor = 0


class GeneratedSeedPool(SeedPool):
    """Unbounded pool of pseudo-random bits (simulation only).

    Bits are generated in chunks from a PCG64 stream on demand, so the pool
    never runs dry. Fed bits are read before any further generated ones.
    """

    CHUNK = 1 << 16

    def __init__(self, seed: SeedLike):
        super().__init__()
        self._rng = rng_from_seed(seed, 0x5EED)

    @property
    def remaining(self) -> int:
        return sys.maxsize

    def _buffered(self) -> int:
        return self._bits.size - self._cursor

    def take(self, nbits: int) -> int:
        if nbits > self._buffered():
            more = max(self.CHUNK, nbits - self._buffered())
            fresh = self._rng.integers(0, 2, size=more, dtype=np.uint8)
            self._bits = np.concatenate([self._bits[self._cursor:], fresh])
            self._cursor = 0
        return super().take(nbits)

    def copy(self) -> "GeneratedSeedPool":
        raise InvalidParameterError("generated pools cannot be copied; rebuild from the seed")


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise InvalidParameterError("seed bits must be 0/1 values")
    return arr
