"""Seed accounting and colexicographic (un)ranking of check-instant subsets."""

from __future__ import annotations

import math

import gmpy2
import mpmath
import numpy as np
from scipy.special import betaln

from .errors import InvalidParameterError, SeedExhaustedError
from .seeding import SeedPool

EXACT_LIMIT = 10_000


def _check(m: int, k: int) -> None:
    if not 0 < k < m:
        raise InvalidParameterError(f"need 0 < n_Q < m, got m={m}, n_Q={k}")


def log2_binomial(m: int, k: int) -> float:
    """``log2 C(m, k)`` evaluated with 40-digit log-gamma arithmetic."""
    with mpmath.workdps(40):
        value = (mpmath.loggamma(m + 1) - mpmath.loggamma(k + 1)
                 - mpmath.loggamma(m - k + 1)) / mpmath.log(2)
        return float(value)


def seed_cost(m: int, k: int) -> int:
    """Bits needed to encode a choice of ``k`` check instants among ``m``.

    ``ceil(log2 C(m, k))``. Exact integer arithmetic is used for
    ``m <= 10**4`` and whenever the high-precision log-gamma value lies
    within a guard band of an integer; otherwise the log-gamma value is
    rounded up.
    """
    m, k = int(m), int(k)
    _check(m, k)
    if m <= EXACT_LIMIT:
        return int((math.comb(m, k) - 1).bit_length())
    with mpmath.workdps(40):
        value = (mpmath.loggamma(m + 1) - mpmath.loggamma(k + 1)
                 - mpmath.loggamma(m - k + 1)) / mpmath.log(2)
        nearest = mpmath.nint(value)
        if abs(value - nearest) < mpmath.mpf(10) ** -20:
            return int((gmpy2.comb(m, k) - 1).bit_length())
        return int(mpmath.ceil(value))


def _log_comb(c: float, i: int) -> float:
    # natural log of C(c, i) for real c >= i, -inf below
    if c < i:
        return -math.inf
    if i == 0 or c == i:
        return 0.0
    return float(-math.log(c + 1) - betaln(c - i + 1, i + 1))


def _log_of(r) -> float:
    if r <= 0:
        return -math.inf
    shift = max(0, int(r.bit_length()) - 64)
    return math.log(int(r >> shift)) + shift * math.log(2)


def _falling(a: int, d: int):
    # a (a - 1) ... (a - d + 1) by balanced products
    if d <= 128:
        return gmpy2.mpz(math.prod(range(a - d + 1, a + 1)))
    h = d // 2
    return _falling(a, h) * _falling(a - h, d - h)


def _cheap_ratio(d: int, a: int, value) -> bool:
    # a ratio of two d-term products is cheaper than a fresh binomial
    # while the products stay smaller than the binomial itself
    return d * max(1, int(a).bit_length()) <= max(64, int(value).bit_length())


def _largest_below(r, i: int, lo: int, hi: int) -> int:
    # float estimate of the largest c in [lo, hi] with C(c, i) <= r
    target = _log_of(r)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_comb(mid, i) <= target:
            lo = mid
        else:
            hi = mid
    return hi if _log_comb(hi, i) <= target else lo


def _settle(r, i: int, c: int, value, upper: int):
    # exact correction of an estimate c with value = C(c, i)
    while value > r:
        value = value * (c - i) // c
        c -= 1
    while c < upper:
        nxt = value * (c + 1) // (c + 1 - i) if c + 1 > i else gmpy2.mpz(1)
        if nxt > r:
            break
        value, c = nxt, c + 1
    return c, value


def unrank_combination(rank: int, m: int, k: int) -> np.ndarray:
    """``k``-subset of ``range(m)`` with the given colexicographic rank.

    Uses the combinatorial number system ``rank = sum_i C(c_i, i)`` with
    ``c_k > ... > c_1 >= 0``. Each ``c_i`` is estimated in floating point
    and corrected exactly; the binomial values are carried from one
    element to the next through small-integer ratios, so no large binomial
    is recomputed from scratch.
    """
    m, k = int(m), int(k)
    if not 0 < k <= m:
        raise InvalidParameterError(f"need 0 < k <= m, got m={m}, k={k}")
    r = gmpy2.mpz(rank)
    if r < 0 or r >= gmpy2.comb(m, k):
        raise InvalidParameterError("rank out of range")
    out = np.empty(k, dtype=np.int64)
    c = _largest_below(r, k, k - 1, m - 1)
    c, value = _settle(r, k, c, gmpy2.comb(c, k), m - 1)
    for i in range(k, 0, -1):
        out[i - 1] = c
        r -= value
        if i == 1:
            break
        # C(c - 1, i - 1) = C(c, i) i / c, then jump down to the estimate
        upper = c - 1
        base = value * i // c if c > 0 else gmpy2.mpz(0)
        if base == 0 and upper >= i - 1:
            base = gmpy2.comb(upper, i - 1)
        est = _largest_below(r, i - 1, i - 2, upper)
        d = upper - est
        if d == 0:
            start = base
        elif est < 0:
            start = gmpy2.mpz(0)
        elif _cheap_ratio(d, upper, base):
            start = base * _falling(upper - i + 1, d) // _falling(upper, d)
        else:
            start = gmpy2.comb(est, i - 1)
        c, value = _settle(r, i - 1, est, start, upper)
    return out


def rank_combination(subset, m: int) -> int:
    """Colexicographic rank of a subset of ``range(m)``."""
    items = sorted(int(x) for x in subset)
    if len(set(items)) != len(items) or (items and (items[0] < 0 or items[-1] >= m)):
        raise InvalidParameterError("subset must hold distinct indices in range(m)")
    rank = gmpy2.mpz(0)
    value = gmpy2.mpz(0)  # C(items[i], i + 1)
    prev = -1
    for i, c in enumerate(items, start=1):
        if i > 1 and value > 0:
            # C(prev, i) = C(prev, i - 1) (prev - i + 1) / i, then step up to c
            value = value * (prev - i + 1) // i
        if value == 0 or not _cheap_ratio(c - prev, c, value):
            value = gmpy2.comb(c, i)
        elif c > prev:
            d = c - prev
            value = value * _falling(c, d) // _falling(c - i, d)
        rank += value
        prev = c
    return int(rank)


def select_check_instants(m: int, k: int, seed: SeedPool) -> np.ndarray:
    """Sorted positions of the ``k`` check measurements among ``m``.

    Draws ``seed_cost(m, k)``-bit integers from the pool until one is below
    ``C(m, k)`` (rejection sampling keeps the choice uniform) and unranks it.

    Raises
    ------
    SeedExhaustedError
        If the pool runs out before an admissible rank is drawn.
    """
    m, k = int(m), int(k)
    _check(m, k)
    t = seed_cost(m, k)
    if seed.remaining < t:
        raise SeedExhaustedError(f"selection needs {t} seed bits, {seed.remaining} left")
    total = gmpy2.comb(m, k)
    while True:
        r = seed.take(t)
        if r < total:
            return unrank_combination(r, m, k)
