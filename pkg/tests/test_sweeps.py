import math

import numpy as np
import pytest

from oracles import gaussian_mass
from sdiqrng.combinatorics import seed_cost
from sdiqrng.sweeps import (
    SWEEPS,
    experiment_partition,
    noise_sweep,
    overlap_sweep,
    precision_sweep,
    rate_sweep,
    squeezing_sweep,
    subset_bound_sweep,
)


def test_registry():
    assert set(SWEEPS) == {"overlap", "subsets", "squeezing", "precision", "rates", "noise"}


def test_experiment_partition_range():
    part = experiment_partition(5)
    assert part.n_interior == 32
    assert part.delta * 16 == pytest.approx(10.5 * math.sqrt(0.677), rel=1e-15)


def test_overlap_sweep_small_width_limit():
    rows = overlap_sweep([0.001, 0.01, 0.1, 0.3, 0.6])
    ratios = [r["c_over_small_delta"] for r in rows]
    assert ratios[0] == pytest.approx(1.0, abs=1e-9)
    assert all(0 < r <= 1 for r in ratios)
    assert np.all(np.diff(ratios) < 0)
    for r in rows:
        assert r["neg_log2_c"] == pytest.approx(-math.log2(r["c"]), rel=1e-14)
        assert r["h_low"] == pytest.approx(r["neg_log2_c"] - r["h_max"], rel=1e-12)
        # for the vacuum the bound trails the min-entropy by a small gap
        assert 0 <= r["h_inf"] - r["h_low"] < 0.1
        assert r["h_low_analytic"] == pytest.approx(r["h_low"], abs=0.05)


def test_overlap_sweep_thermal_gap_grows():
    vac = overlap_sweep([0.2], analytic=False)[0]
    hot = overlap_sweep([0.2], mu=1.0, analytic=False)[0]
    assert "h_low_analytic" not in vac
    assert hot["h_inf"] > vac["h_inf"]
    assert hot["h_inf"] - hot["h_low"] > vac["h_inf"] - vac["h_low"] + 0.5


def test_squeezing_sweep_separates_twins():
    rows = squeezing_sweep([1.1, 1.5, 2.0, 3.0])
    gaps = [r["h_low_squeezed"] - r["h_low_thermal"] for r in rows]
    assert all(g > 0 for g in gaps)
    assert np.all(np.diff(gaps) > 0)
    for r in rows:
        assert r["h_low_squeezed"] <= r["h_inf"] + 1e-12


def test_precision_sweep_against_quadrature():
    rows = precision_sweep([3, 4, 5, 6, 8])
    for r in rows:
        part = experiment_partition(r["bit_depth"])
        assert r["delta"] == part.delta
        # the most likely mid-riser bins are [0, delta] and [-delta, 0]
        top = gaussian_mass(0.677, 0.0, part.delta)
        assert r["h_inf"] == pytest.approx(-math.log2(top), rel=1e-10)
        assert r["h_low"] == pytest.approx(r["neg_log2_c"] - r["h_max"], rel=1e-12)
    assert np.all(np.diff([r["h_low"] for r in rows]) > 0)
    assert rows[0]["h_low"] < 0


def test_subset_bound_sweep_rows():
    rows = subset_bound_sweep([4, 6], [64, 1024, 4096], pool_size=2**18, subsets=20, seed=5)
    assert [(r["bit_depth"], r["n_q"]) for r in rows] == [
        (j, n) for j in (4, 6) for n in (64, 1024, 4096)
    ]
    for j in (4, 6):
        means = [r["mean_h_low"] for r in rows if r["bit_depth"] == j]
        exact = next(r["exact_h_low"] for r in rows if r["bit_depth"] == j)
        # the estimate is conservative and closes on the exact bound as n_Q grows
        assert np.all(np.diff(means) > 0)
        assert all(m < exact for m in means)
    again = subset_bound_sweep([4, 6], [64, 1024, 4096], pool_size=2**18, subsets=20, seed=5)
    assert again == rows


def test_plugin_subsets_sit_closer_to_exact():
    kw = dict(pool_size=2**18, subsets=20, seed=1)
    bay = subset_bound_sweep([5], [4096], **kw)[0]
    plug = subset_bound_sweep([5], [4096], estimator="plugin", **kw)[0]
    assert abs(plug["mean_h_low"] - plug["exact_h_low"]) < abs(bay["mean_h_low"] - bay["exact_h_low"])


def test_rate_sweep_converges():
    rows = rate_sweep([5], [10, 16, 22, 28, 34], trials=30, seed=2)
    gaps = [r["relative_gap"] for r in rows]
    assert rows[0]["mean_r_sec"] == 0.0
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 0.03
    for r in rows:
        m = 2 ** r["log2_m"]
        assert r["n_q"] == math.ceil(math.sqrt(m))
        assert r["t_bits"] == seed_cost(m, r["n_q"])
        assert r["mean_r_sec"] <= r["asymptotic"]


def test_noise_sweep_trends():
    rows = noise_sweep([0.55, 0.677, 1.0], m=2**16, seed=3)
    exact = [r["exact_h_low"] for r in rows]
    assert np.all(np.diff(exact) < 0)
    assert np.all(np.diff([r["h_inf"] for r in rows]) > 0)
    for r in rows:
        assert r["variance_ratio"] == pytest.approx(r["variance"] / 0.5)
        assert r["h_low"] < r["exact_h_low"]
        assert 0 <= r["r_sec"] < r["h_low"]
