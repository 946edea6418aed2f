"""Three quick statistical checks on extracted bits.

These are sanity checks, not a certification battery: monobit frequency,
total number of runs, and bit autocorrelation over lags 1..16. Each test
is two-sided at a 1% significance level; the 16 lags are treated as one
family with a Sidak-corrected per-lag level, so the whole autocorrelation
test also rejects ideal input with probability 1%.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
from scipy.special import erfc, ndtri

from .errors import InsufficientDataError, InvalidParameterError

MIN_BITS = 100_000
ALPHA = 0.01
MAX_LAG = 16


@dataclass(frozen=True)
class SanityResult:
    """One test outcome; ``passed`` iff ``statistic <= threshold``."""

    name: str
    statistic: float
    threshold: float
    passed: bool
    p_value: float
    n_bits: int

    def to_dict(self) -> dict:
        return asdict(self)


def _z_threshold(alpha: float) -> float:
    return float(-ndtri(alpha / 2))


def _as_bits(bits, n_bits: Optional[int]) -> np.ndarray:
    if isinstance(bits, (bytes, bytearray, memoryview)):
        arr = np.unpackbits(np.frombuffer(bytes(bits), dtype=np.uint8), bitorder="little")
        if n_bits is not None:
            if n_bits > arr.size:
                raise InvalidParameterError("n_bits exceeds the packed length")
            arr = arr[:n_bits]
        return arr
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise InvalidParameterError("bits must be 0/1 values")
    return arr if n_bits is None else arr[:n_bits]


def monobit(bits, alpha: float = ALPHA) -> SanityResult:
    """Frequency test on ``|S_n| / sqrt(n)`` with ``S_n = sum(2 b - 1)``."""
    n = bits.size
    s = abs(2 * int(np.count_nonzero(bits)) - n) / math.sqrt(n)
    p = float(erfc(s / math.sqrt(2)))
    thr = _z_threshold(alpha)
    return SanityResult("monobit", s, thr, bool(s <= thr), p, int(n))


def runs(bits, alpha: float = ALPHA) -> SanityResult:
    """Runs test: standard score ``|z|`` of the total run count.

    As in the usual formulation the test fails outright (``statistic = inf``)
    when the ones-fraction ``pi`` is off by more than ``2 / sqrt(n)``.
    """
    n = bits.size
    pi = np.count_nonzero(bits) / n
    thr = _z_threshold(alpha)
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return SanityResult("runs", math.inf, thr, False, 0.0, int(n))
    v = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    # the run count has mean 2 n pi (1 - pi) and standard deviation 2 sqrt(n) pi (1 - pi)
    z = abs(v - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(n) * pi * (1 - pi))
    p = float(erfc(z / math.sqrt(2)))
    return SanityResult("runs", z, thr, bool(z <= thr), p, int(n))


def lag_autocorrelation(bits, max_lag: int = MAX_LAG, alpha: float = ALPHA) -> SanityResult:
    """Largest ``|z_k|`` over lags ``k = 1..max_lag``.

    ``z_k = 2 (A_k - (n - k)/2) / sqrt(n - k)`` with ``A_k`` the number of
    positions where ``b_i != b_{i+k}``.
    """
    n = bits.size
    z = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        a = np.count_nonzero(bits[:-k] != bits[k:])
        z[k - 1] = 2 * (a - (n - k) / 2) / math.sqrt(n - k)
    per_lag = 1 - (1 - alpha) ** (1 / max_lag)
    stat = float(np.abs(z).max())
    p_single = float(erfc(stat / math.sqrt(2)))
    p = 1 - (1 - p_single) ** max_lag
    return SanityResult("autocorrelation", stat, _z_threshold(per_lag), bool(stat <= _z_threshold(per_lag)),
                        float(p), int(n))


def sanity_tests(bits, n_bits: Optional[int] = None, alpha: float = ALPHA) -> List[SanityResult]:
    """Run monobit, runs and lag-autocorrelation tests.

    Parameters
    ----------
    bits : bytes or array of 0/1
        Packed bytes follow the extractor layout (first bit is the LSB of
        byte 0).
    n_bits : int, optional
        Number of valid bits in a packed input.
    """
    arr = _as_bits(bits, n_bits)
    if arr.size < MIN_BITS:
        raise InsufficientDataError(f"need at least {MIN_BITS} bits, got {arr.size}")
    return [monobit(arr, alpha), runs(arr, alpha), lag_autocorrelation(arr, MAX_LAG, alpha)]
