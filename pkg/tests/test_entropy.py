import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import renyi_half, sinc_kernel_eigenvalue
from sdiqrng.entropy import (
    AccuracyWarning,
    Estimator,
    analytic_entropies,
    classical_min_entropy,
    estimate_max_entropy,
    exact_report,
    jacobi_theta3,
    max_entropy,
    min_entropy_lower_bound,
    overlap_constant,
    shannon_entropy,
    tail_error_bound,
)
from sdiqrng.errors import (
    InsufficientDataError,
    InvalidDistributionError,
    InvalidParameterError,
    OverlapSaturationError,
)
from sdiqrng.spheroidal import concentration_eigenvalue, legendre_coefficients, radial_s0
from sdiqrng.states import DiscreteDistribution, GaussianState, Partition, bin_probabilities

# recorded from the Nystrom oracle before the production code was written
C_054 = 0.04638219189317089


def test_overlap_fixture_at_054():
    ov = overlap_constant(0.54, 0.54)
    assert ov.c == pytest.approx(C_054, rel=1e-13)
    assert ov.c == pytest.approx(0.2916 / (2 * math.pi) * ov.s0**2, rel=1e-13)
    assert ov.c == pytest.approx(sinc_kernel_eigenvalue(0.2916 / 4), rel=1e-12)


@pytest.mark.parametrize("delta", [0.01, 0.1, 0.3, 0.54, 1.0, 2.0, 3.0, 5.0, 6.9])
def test_overlap_against_nystrom(delta):
    ov = overlap_constant(delta, delta)
    assert ov.c == pytest.approx(sinc_kernel_eigenvalue(delta * delta / 4, 160), rel=1e-11)


@pytest.mark.parametrize("delta", [1e-3, 1e-2])
def test_overlap_small_width_limit(delta):
    ov = overlap_constant(delta, delta)
    ratio = ov.c / (delta**2 / (2 * math.pi))
    # the ratio equals S0**2 which approaches 1 from below
    assert ratio <= 1.0
    assert 1 - ratio < 1e-4


def test_overlap_monotone_and_log_form():
    deltas = np.arange(0.05, 0.601, 0.05)
    cs = [overlap_constant(d, d).c for d in deltas]
    assert all(b > a for a, b in zip(cs, cs[1:]))
    d = 0.3
    ov = overlap_constant(d, d)
    assert ov.neg_log2 == pytest.approx(
        math.log2(2 * math.pi / d**2 * radial_s0(d * d / 4) ** -2), rel=1e-14)


@given(st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_overlap_depends_on_product(dq, dp):
    a = overlap_constant(dq, dp)
    b = overlap_constant(dp, dq)
    c = overlap_constant(math.sqrt(dq * dp), math.sqrt(dq * dp))
    assert a.c == b.c
    assert a.c == pytest.approx(c.c, rel=1e-12)


def test_overlap_rejects():
    with pytest.raises(InvalidParameterError):
        overlap_constant(0.0, 0.1)
    for d in (8.0, 30.0, 1e3):
        with pytest.raises(OverlapSaturationError):
            overlap_constant(d, d)


def test_spheroidal_zero_bandwidth():
    chi, d = legendre_coefficients(0.0)
    assert chi == pytest.approx(0.0, abs=1e-14)
    # d_0 P_0 with unit L2 norm on [-1, 1]
    assert d[0] == pytest.approx(math.sqrt(0.5))
    assert np.all(d[1:] == 0)
    assert radial_s0(0.0) == 1.0
    with pytest.raises(InvalidParameterError):
        radial_s0(1.0, 0.5)


@pytest.mark.parametrize("c", [0.5, 1.0, 4.0])
def test_spheroidal_separation_constant_small_c(c):
    # small-c series of the prolate separation constant chi_00
    chi, _ = legendre_coefficients(c)
    if c <= 1:
        series = c**2 / 3 - 2 * c**4 / 135 + 4 * c**6 / 8505
        assert chi == pytest.approx(series, abs=1e-4 * c**8 + 1e-14)
    assert concentration_eigenvalue(c) == pytest.approx(sinc_kernel_eigenvalue(c), rel=1e-11)


@pytest.mark.parametrize("k", [1, 2, 7, 32])
def test_min_and_max_entropy_uniform(k):
    p = np.full(k, 1 / k)
    assert classical_min_entropy(p) == pytest.approx(math.log2(k))
    assert max_entropy(p) == pytest.approx(math.log2(k))


def test_entropies_certain_outcome():
    p = np.array([0.0, 1.0, 0.0])
    assert classical_min_entropy(p) == 0.0
    assert max_entropy(p) == 0.0


def test_vacuum_min_entropy_fixture():
    dist = bin_probabilities(0.5, Partition.from_width(0.1, 6.0))
    assert classical_min_entropy(dist) == pytest.approx(-math.log2(math.erf(0.05)), rel=1e-12)
    assert classical_min_entropy(dist) == pytest.approx(4.149, abs=5e-4)


def test_entropy_rejects_unnormalised():
    with pytest.raises(InvalidDistributionError):
        max_entropy(np.array([0.5, 0.6]))
    part = Partition.from_bits(1, 1.0)
    with pytest.raises(InvalidDistributionError):
        max_entropy(DiscreteDistribution(part, counts=[1, 1, 1, 1, 1]))


def test_thermal_max_entropy_matches_closed_form():
    mu, delta = 2.0, 0.1
    part = Partition.from_width(delta, 12 * math.sqrt(0.5 + mu))
    dist = bin_probabilities(0.5 + mu, part)
    an = analytic_entropies(mu, delta)
    exact = max_entropy(dist)
    # the closed form is h_low_approx = -log2 c - H_max with c ~ delta^2 / (2 pi)
    approx = -math.log2(delta**2 / (2 * math.pi)) - an.h_low_approx
    assert exact == pytest.approx(approx, abs=1e-3)
    assert exact == pytest.approx(renyi_half(dist.probs), abs=1e-12)


@given(arrays(float, st.integers(2, 40), elements=st.floats(0.0, 1.0)))
def test_renyi_ordering(raw):
    if raw.sum() <= 0:
        return
    p = raw / raw.sum()
    p = p / p.sum()
    h_min = classical_min_entropy(p)
    h_sh = shannon_entropy(p)
    h_max = max_entropy(p)
    assert h_max >= h_sh - 1e-9
    assert h_sh >= h_min - 1e-9
    assert h_max == pytest.approx(max(0.0, renyi_half(p)), abs=1e-9)


def _counts(values, j=1):
    part = Partition.from_bits(j, 1.0, centered=False)
    full = np.zeros(part.n_outcomes, dtype=int)
    full[: len(values)] = values
    return DiscreteDistribution(part, counts=full)


def test_plugin_degenerate_and_two_outcomes():
    assert estimate_max_entropy(_counts([0, 10]), "plugin") == 0.0
    assert estimate_max_entropy(_counts([0, 1, 1]), "plugin") == pytest.approx(1.0)


def test_bayesian_formula():
    counts = _counts([0, 3, 1, 0])
    p = (np.array([0, 3, 1, 0]) + 0.5) / (4 + 2.0)
    assert estimate_max_entropy(counts, "bayesian") == pytest.approx(renyi_half(p), rel=1e-14)


def test_estimators_need_two_counts():
    with pytest.raises(InsufficientDataError):
        estimate_max_entropy(_counts([0, 1]), "plugin")
    with pytest.raises(InvalidParameterError):
        estimate_max_entropy(_counts([0, 1, 1]), "exact")


def test_estimators_near_exact_on_replica_statistics():
    var = 0.677
    part = Partition.from_bits(5, 10.5 * math.sqrt(var), centered=False)
    dist = bin_probabilities(var, part)
    exact = max_entropy(dist)
    rng = np.random.default_rng(5)
    counts = DiscreteDistribution(part, counts=rng.multinomial(25_000, dist.probs))
    plug = estimate_max_entropy(counts, "plugin")
    bayes = estimate_max_entropy(counts, "bayesian")
    assert bayes >= plug
    assert abs(plug - exact) < 0.1
    assert abs(bayes - exact) < 0.1


def test_plugin_converges_with_sample_size():
    part = Partition.from_bits(5, 10.5 * math.sqrt(0.677), centered=False)
    dist = bin_probabilities(0.677, part)
    exact = max_entropy(dist)
    rng = np.random.default_rng(17)
    errors = []
    for n in (10**3, 10**4, 10**5, 10**6):
        est = [estimate_max_entropy(DiscreteDistribution(part, counts=c), "plugin")
               for c in rng.multinomial(n, dist.probs, size=20)]
        errors.append(abs(np.mean(est) - exact))
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_lower_bound_composition():
    rep = min_entropy_lower_bound(0.2, 0.2, 1.5, h_inf=3.0, estimator="plugin")
    assert rep.h_low == -math.log2(overlap_constant(0.2, 0.2).c) - 1.5
    assert rep.estimator is Estimator.PLUGIN
    assert rep.guessing_probability_bound == pytest.approx(2 ** -rep.h_low)
    with pytest.raises(InvalidParameterError):
        min_entropy_lower_bound(0.2, 0.2, -0.1)


def test_lower_bound_zero_h_max_limit():
    d = 1e-3
    rep = min_entropy_lower_bound(d, d, 0.0)
    assert rep.h_low == pytest.approx(-math.log2(d * d / (2 * math.pi)), abs=1e-6)


def test_lower_bound_may_be_negative():
    rep = min_entropy_lower_bound(0.1, 0.1, 20.0)
    assert rep.h_low < 0


def test_vacuum_gap_at_fine_width():
    part = Partition.from_width(0.01, 12 * math.sqrt(0.5))
    rep = exact_report(0.5, 0.5, part)
    assert 0 <= rep.h_inf - rep.h_low <= 0.02


def test_thermal_gap_limit():
    mu = 2.0
    part = Partition.from_width(1e-3, 12 * math.sqrt(0.5 + mu))
    rep = exact_report(0.5 + mu, 0.5 + mu, part)
    assert rep.h_inf - rep.h_low == pytest.approx(math.log2(5), abs=0.02)


@given(st.floats(0.0, 5.0), st.floats(0.01, 1.5))
def test_h_low_below_h_inf(mu, delta):
    var = 0.5 + mu
    part = Partition.from_width(delta, 12 * math.sqrt(var))
    rep = exact_report(var, var, part)
    assert rep.h_low <= rep.h_inf + 1e-9


@pytest.mark.parametrize("mu", [0.0, 0.5, 2.0, 5.0])
@pytest.mark.parametrize("delta", [0.01, 0.05])
def test_analytic_matches_exact(mu, delta):
    var = 0.5 + mu
    rep = exact_report(var, var, Partition.from_width(delta, 12 * math.sqrt(var)))
    an = analytic_entropies(mu, delta)
    assert an.h_inf_approx == pytest.approx(rep.h_inf, abs=1e-3)
    assert an.h_low_approx == pytest.approx(rep.h_low, abs=1e-3)


def test_analytic_limits():
    an0 = analytic_entropies(0.0, 1e-3)
    assert abs(an0.h_low_approx - an0.h_inf_approx) < 1e-6
    assert analytic_entropies(2.0, 0.01).asymptotic_gap == pytest.approx(math.log2(5))


def test_analytic_accuracy_warning():
    with pytest.warns(AccuracyWarning):
        analytic_entropies(0.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        analytic_entropies(0.0, 0.1)


@pytest.mark.parametrize("x", np.linspace(0.01, 5.0, 60))
def test_theta_inequality(x):
    assert x * jacobi_theta3(math.exp(-x * x)) >= math.sqrt(math.pi) * (1 - 1e-14)


@pytest.mark.parametrize("q", [0.0, 0.01, 0.3, 0.9, 0.999])
def test_theta_direct_sum(q):
    direct = 1 + 2 * sum(q ** (n * n) for n in range(1, 5000))
    assert jacobi_theta3(q) == pytest.approx(direct, rel=1e-12)


def test_tail_error_fixture():
    sigma = math.sqrt(0.677)
    part = Partition.from_bits(5, 10.5 * sigma, centered=False)
    bound = tail_error_bound(sigma, part, 25_000)
    assert bound == pytest.approx(math.sqrt(25_000) * math.erfc(10.5 / math.sqrt(2)), rel=1e-10)
    assert bound == pytest.approx(1.4e-23, rel=0.05)


def test_tail_error_scaling_and_limit():
    part = Partition.from_bits(5, 3.0)
    a = tail_error_bound(1.0, part, 1000)
    b = tail_error_bound(1.0, part, 2000)
    assert b / a == pytest.approx(math.sqrt(2), rel=1e-14)
    assert tail_error_bound(1.0, Partition.from_bits(5, 60.0), 1000) == 0.0
    with pytest.raises(InvalidParameterError):
        tail_error_bound(1.0, part, 0)
