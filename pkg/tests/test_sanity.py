import math

import numpy as np
import pytest
from scipy import stats

from sdiqrng.errors import InsufficientDataError, InvalidParameterError
from sdiqrng.extractor import pack_bits
from sdiqrng.sanity import MIN_BITS, lag_autocorrelation, monobit, runs, sanity_tests

N = 200_000


def _by_name(results):
    return {r.name: r for r in results}


def test_all_zeros_fail_monobit():
    res = _by_name(sanity_tests(np.zeros(N, dtype=np.uint8)))
    assert not res["monobit"].passed
    assert not res["runs"].passed


def test_alternating_fails_runs_passes_monobit():
    bits = np.tile([0, 1], N // 2).astype(np.uint8)
    res = _by_name(sanity_tests(bits))
    assert res["monobit"].passed
    assert not res["runs"].passed
    assert not res["autocorrelation"].passed


def test_random_bits_pass():
    bits = np.random.default_rng(1).integers(0, 2, N, dtype=np.uint8)
    assert all(r.passed for r in sanity_tests(bits))


def test_periodic_correlation_detected():
    rng = np.random.default_rng(2)
    x = rng.integers(0, 2, N, dtype=np.uint8)
    bits = x.copy()
    idx = np.flatnonzero(rng.random(N) < 0.1)
    idx = idx[idx >= 7]
    bits[idx] = x[idx - 7]
    res = _by_name(sanity_tests(bits))
    assert not res["autocorrelation"].passed


def test_packed_input_matches_unpacked():
    bits = np.random.default_rng(3).integers(0, 2, N + 3, dtype=np.uint8)
    a = sanity_tests(bits)
    b = sanity_tests(pack_bits(bits), n_bits=bits.size)
    assert a == b


def test_runs_detects_excess_alternation():
    rng = np.random.default_rng(8)
    bits = rng.integers(0, 2, N, dtype=np.uint8)
    # each flipped repeat adds one run on average; 700 extra runs against a
    # standard deviation of sqrt(N) / 2 is z near 3
    repeats = np.flatnonzero(bits[1:] == bits[:-1]) + 1
    flip = rng.choice(repeats, size=700, replace=False)
    bits[flip] ^= 1
    r = runs(bits)
    assert 2.8 < r.statistic < 4.0
    assert not r.passed


def test_monobit_oracle():
    bits = np.random.default_rng(4).integers(0, 2, N, dtype=np.uint8)
    r = monobit(bits)
    s = abs(2 * bits.sum() - N) / math.sqrt(N)
    assert r.statistic == pytest.approx(s)
    assert r.p_value == pytest.approx(math.erfc(s / math.sqrt(2)))
    assert r.threshold == pytest.approx(stats.norm.ppf(0.995))


def test_runs_oracle():
    bits = np.random.default_rng(5).integers(0, 2, N, dtype=np.uint8)
    r = runs(bits)
    pi = bits.mean()
    v = 1 + sum(1 for a, b in zip(bits[:-1], bits[1:]) if a != b)
    # p-value as in NIST SP 800-22, section 2.3
    p = math.erfc(abs(v - 2 * N * pi * (1 - pi)) / (2 * math.sqrt(2 * N) * pi * (1 - pi)))
    assert r.p_value == pytest.approx(p, rel=1e-9)
    assert r.passed == (p >= 0.01)


def test_autocorrelation_threshold_is_family_wise():
    r = lag_autocorrelation(np.random.default_rng(6).integers(0, 2, N, dtype=np.uint8))
    per_lag = 1 - 0.99 ** (1 / 16)
    assert r.threshold == pytest.approx(stats.norm.ppf(1 - per_lag / 2))


def test_false_rejection_rate():
    rng = np.random.default_rng(7)
    trials = 300
    fails = np.zeros(3)
    for _ in range(trials):
        res = sanity_tests(rng.integers(0, 2, MIN_BITS, dtype=np.uint8))
        fails += [not r.passed for r in res]
    # each test rejects ideal input with probability 0.01
    upper = stats.binom.ppf(0.999, trials, 0.01)
    assert np.all(fails <= upper)


def test_sanity_validation():
    with pytest.raises(InsufficientDataError):
        sanity_tests(np.zeros(10, dtype=np.uint8))
    with pytest.raises(InvalidParameterError):
        sanity_tests(np.full(MIN_BITS, 2))
    with pytest.raises(InvalidParameterError):
        sanity_tests(b"\x00" * 10, n_bits=200)
