"""Parameter sweeps behind the entropy, rate and noise figures.

Every function returns a list of flat dict rows suitable for CSV output.
"""

from __future__ import annotations

import math
import warnings
from typing import Dict, List, Sequence

import numpy as np

from .combinatorics import seed_cost
from .entropy import (
    analytic_entropies,
    estimate_max_entropy,
    exact_report,
    max_entropy,
    overlap_constant,
)
from .protocol import ProtocolConfig, _subseed, ceil_sqrt, run_protocol, secure_rate
from .seeding import SeedLike, rng_from_seed
from .states import (
    DiscreteDistribution,
    GaussianState,
    Partition,
    bin_probabilities,
    squeezed_thermal_pair,
)

Row = Dict[str, float]

EXPERIMENT_VARIANCE = 0.677
FULL_SCALE_SIGMAS = 10.5


def experiment_partition(bit_depth: int, variance: float = EXPERIMENT_VARIANCE,
                         sigmas: float = FULL_SCALE_SIGMAS) -> Partition:
    """ADC partition of the desk-scale replica (mid-riser bins, range ``sigmas * sigma``)."""
    return Partition.from_bits(bit_depth, sigmas * math.sqrt(variance), centered=False)


def overlap_sweep(deltas: Sequence[float], mu: float = 0.0, p_max_sigmas: float = 12.0,
                  analytic: bool = True) -> List[Row]:
    """Overlap constant and exact entropies of a thermal state against ``delta``.

    ``mu = 0`` is the vacuum.
    """
    state = GaussianState.thermal(mu) if mu > 0 else GaussianState.vacuum()
    sigma = math.sqrt(state.var_p)
    rows = []
    for d in deltas:
        ov = overlap_constant(d, d)
        part = Partition.from_width(d, p_max_sigmas * sigma)
        rep = exact_report(state.var_p, state.var_q, part)
        row = {
            "delta": float(d),
            "c": ov.c,
            "neg_log2_c": ov.neg_log2,
            "c_over_small_delta": ov.c / (d * d / (2 * math.pi)),
            "h_inf": rep.h_inf,
            "h_max": rep.h_max,
            "h_low": rep.h_low,
        }
        if analytic:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                an = analytic_entropies(mu, d)
            row["h_inf_analytic"] = an.h_inf_approx
            row["h_low_analytic"] = an.h_low_approx
        rows.append(row)
    return rows


def subset_bound_sweep(
    bit_depths: Sequence[int],
    n_q_values: Sequence[int],
    *,
    variance: float = EXPERIMENT_VARIANCE,
    pool_size: int = 2**22,
    subsets: int = 200,
    estimator="bayesian",
    seed: SeedLike = 0,
) -> List[Row]:
    """Mean bound over random check subsets, per bit depth and subset size.

    A pool of ``pool_size`` check-quadrature outcomes is simulated once;
    for each ``(bit_depth, n_Q)`` the bound is evaluated on ``subsets``
    random subsets of the pool and averaged.
    """
    rng = rng_from_seed(seed, 3)
    pool = rng.normal(0.0, math.sqrt(variance), size=int(pool_size))
    rows = []
    for j in bit_depths:
        part = experiment_partition(j, variance)
        neg_log2_c = overlap_constant(part.delta, part.delta).neg_log2
        labels = part.digitize(pool)
        pos = part.label_to_position(labels)
        exact = exact_report(variance, variance, part)
        for n_q in n_q_values:
            values = np.empty(subsets)
            for s in range(subsets):
                idx = rng.choice(pool.size, size=int(n_q), replace=False)
                counts = np.bincount(pos[idx], minlength=part.n_outcomes)
                h_max = estimate_max_entropy(DiscreteDistribution(part, counts=counts), estimator)
                values[s] = neg_log2_c - h_max
            rows.append({
                "bit_depth": int(j),
                "n_q": int(n_q),
                "delta": part.delta,
                "mean_h_low": float(values.mean()),
                "std_h_low": float(values.std(ddof=1)) if subsets > 1 else 0.0,
                "exact_h_low": exact.h_low,
                "h_inf": exact.h_inf,
                "subsets": int(subsets),
            })
    return rows


def squeezing_sweep(zetas: Sequence[float], delta: float = 0.22,
                    p_max_sigmas: float = 12.0) -> List[Row]:
    """Squeezed state against its thermal twin with identical P statistics."""
    rows = []
    for z in zetas:
        sq, th = squeezed_thermal_pair(z)
        part = Partition.from_width(delta, p_max_sigmas * math.sqrt(sq.var_p))
        rs = exact_report(sq.var_p, sq.var_q, part)
        rt = exact_report(th.var_p, th.var_q, part)
        rows.append({
            "zeta": float(z),
            "delta": float(delta),
            "h_inf": rs.h_inf,
            "h_low_squeezed": rs.h_low,
            "h_low_thermal": rt.h_low,
            "h_max_squeezed": rs.h_max,
            "h_max_thermal": rt.h_max,
        })
    return rows


def precision_sweep(bit_depths: Sequence[int], variance: float = EXPERIMENT_VARIANCE) -> List[Row]:
    """Exact entropies of the replica source for each ADC resolution."""
    rows = []
    for j in bit_depths:
        part = experiment_partition(j, variance)
        rep = exact_report(variance, variance, part)
        rows.append({
            "bit_depth": int(j),
            "delta": part.delta,
            "neg_log2_c": rep.overlap.neg_log2,
            "h_inf": rep.h_inf,
            "h_max": rep.h_max,
            "h_low": rep.h_low,
        })
    return rows


def rate_sweep(
    bit_depths: Sequence[int],
    log2_m: Sequence[int],
    *,
    variance: float = EXPERIMENT_VARIANCE,
    trials: int = 200,
    estimator="bayesian",
    seed: SeedLike = 0,
) -> List[Row]:
    """Secure rate against the number of measurements.

    For each ``m`` the check outcomes of ``n_Q = ceil(sqrt(m))`` measurements
    are drawn ``trials`` times from the exact outcome distribution; the
    table reports mean and 3-sigma spread of ``r_sec`` together with the
    asymptotic value (exact ``h_low``).
    """
    rng = rng_from_seed(seed, 8)
    rows = []
    for j in bit_depths:
        part = experiment_partition(j, variance)
        dist = bin_probabilities(variance, part)
        neg_log2_c = overlap_constant(part.delta, part.delta).neg_log2
        asymptotic = neg_log2_c - max_entropy(dist)
        for e in log2_m:
            m = 2 ** int(e)
            n_q = ceil_sqrt(m)
            t = seed_cost(m, n_q)
            counts = rng.multinomial(n_q, dist.probs, size=trials)
            rates = np.empty(trials)
            for i in range(trials):
                h_max = estimate_max_entropy(DiscreteDistribution(part, counts=counts[i]), estimator)
                rates[i] = secure_rate(m, n_q, neg_log2_c - h_max, t)
            rows.append({
                "bit_depth": int(j),
                "log2_m": int(e),
                "n_q": int(n_q),
                "t_bits": int(t),
                "mean_r_sec": float(rates.mean()),
                "three_sigma": float(3 * rates.std(ddof=1)) if trials > 1 else 0.0,
                "asymptotic": float(asymptotic),
                "relative_gap": float(1 - rates.mean() / asymptotic) if asymptotic > 0 else math.nan,
            })
    return rows


def noise_sweep(
    variances: Sequence[float],
    bit_depth: int = 5,
    *,
    m: int = 2**20,
    full_scale_variance: float = EXPERIMENT_VARIANCE,
    estimator="bayesian",
    seed: SeedLike = 0,
) -> List[Row]:
    """Bound against the source variance at a fixed ADC range.

    The classical noise adds in variance to the vacuum's 1/2, so a larger
    variance ratio means a lower signal-to-noise ratio.
    """
    part = experiment_partition(bit_depth, full_scale_variance)
    rows = []
    for i, v in enumerate(variances):
        state = GaussianState.empirical(v)
        exact = exact_report(v, v, part)
        cfg = ProtocolConfig(m=m, partition=part, estimator=estimator,
                             recalibration_block=m, seed=int(i))
        run = run_protocol(cfg, state, source_seed=_subseed(seed, 9, i))
        rows.append({
            "variance": float(v),
            "variance_ratio": float(v / 0.5),
            "h_inf": exact.h_inf,
            "exact_h_low": exact.h_low,
            "h_low": run.entropy.h_low,
            "r_sec": run.r_sec,
        })
    return rows


SWEEPS = {
    "overlap": overlap_sweep,
    "subsets": subset_bound_sweep,
    "squeezing": squeezing_sweep,
    "precision": precision_sweep,
    "rates": rate_sweep,
    "noise": noise_sweep,
}
