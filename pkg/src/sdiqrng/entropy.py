"""Entropies of binned quadrature outcomes and the uncertainty-relation bound.

All entropies are in bits. The certified quantity is

    h_low = -log2 c(dq, dp) - H_max(Q)

where ``c`` is the overlap of the two coarse-grained quadrature measurements
and ``H_max`` the order-1/2 Renyi entropy of the check-quadrature outcomes.
``h_low`` lower-bounds the conditional min-entropy of the data quadrature
given arbitrary (quantum) side information about the source.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import (
    InsufficientDataError,
    InvalidDistributionError,
    InvalidParameterError,
    OverlapSaturationError,
)
from .spheroidal import concentration_eigenvalue, radial_s0
from .states import NORMALISATION_TOL, DiscreteDistribution, Partition

# beyond this bandwidth dq*dp/4 the overlap is within 1e-9 of 1 (bound vacuous)
# and the radial series loses precision to cancellation
SATURATION_BANDWIDTH = 12.0


class Estimator(str, Enum):
    EXACT = "exact"
    PLUGIN = "plugin"
    BAYESIAN = "bayesian"


class AccuracyWarning(UserWarning):
    """A closed-form approximation is used outside its regime of validity."""


@dataclass(frozen=True)
class OverlapConstant:
    """Overlap ``c = (dq dp / 2 pi) * S0**2`` with ``S0 = R_00(dq dp / 4, 1)``."""

    dq: float
    dp: float
    c: float
    s0: float

    @property
    def neg_log2(self) -> float:
        return -math.log2(self.c)


def overlap_constant(dq: float, dp: float) -> OverlapConstant:
    """Overlap constant of two coarse-grained conjugate quadrature measurements.

    Raises
    ------
    OverlapSaturationError
        If the bin-width product is so large that ``c`` reaches 1.
    """
    if not (dq > 0 and dp > 0):
        raise InvalidParameterError("bin widths must be positive")
    bandwidth = dq * dp / 4
    c = concentration_eigenvalue(bandwidth) if bandwidth <= SATURATION_BANDWIDTH else 1.0
    if c >= 1.0:
        raise OverlapSaturationError(
            f"overlap saturates at dq*dp = {dq * dp:g}; the bound is vacuous"
        )
    return OverlapConstant(float(dq), float(dp), c, radial_s0(bandwidth, 1.0))


def _probabilities(dist) -> np.ndarray:
    if isinstance(dist, DiscreteDistribution):
        if dist.probs is None:
            raise InvalidDistributionError("a probability-form distribution is required")
        return dist.probs
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidDistributionError("probabilities must be a non-empty 1-d array >= 0")
    if abs(p.sum() - 1.0) > NORMALISATION_TOL:
        raise InvalidDistributionError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def classical_min_entropy(dist) -> float:
    """``-log2 max_k p_k`` over all outcomes, overflow bins included."""
    return float(max(0.0, -math.log2(_probabilities(dist).max())))


def max_entropy(dist) -> float:
    """Renyi entropy of order 1/2, ``2 log2 sum_k sqrt(p_k)``."""
    return float(max(0.0, 2 * math.log2(np.sqrt(_probabilities(dist)).sum())))


def shannon_entropy(dist) -> float:
    p = _probabilities(dist)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def estimate_max_entropy(counts: DiscreteDistribution, estimator="plugin") -> float:
    """Max-entropy estimated from observed outcome counts.

    ``plugin`` uses relative frequencies. ``bayesian`` uses posterior-mean
    probabilities ``(n_k + 1/2) / (N + K/2)`` under a symmetric Dirichlet(1/2)
    prior on all ``K`` outcomes of the partition (overflow bins included).
    """
    estimator = Estimator(estimator)
    if not isinstance(counts, DiscreteDistribution) or not counts.is_counts:
        raise InvalidDistributionError("count-form distribution required")
    N = counts.total
    if N < 2:
        raise InsufficientDataError(f"need at least 2 counts, got {N}")
    n = counts.counts.astype(float)
    if estimator is Estimator.PLUGIN:
        p = n / N
    elif estimator is Estimator.BAYESIAN:
        p = (n + 0.5) / (N + 0.5 * n.size)
    else:
        raise InvalidParameterError("exact estimation needs a probability distribution")
    return float(max(0.0, 2 * math.log2(np.sqrt(p).sum())))


@dataclass(frozen=True)
class EntropyReport:
    """Certified entropy figures for one block of measurements.

    ``h_low`` may be negative; it is clamped only when turned into a rate.
    """

    h_inf: Optional[float]
    h_max: float
    estimator: Estimator
    overlap: OverlapConstant
    h_low: float
    tail_error: float = 0.0
    n_check: int = 0

    @property
    def guessing_probability_bound(self) -> float:
        """Upper bound ``2**-h_low`` on an adversary's guessing probability."""
        return min(1.0, 2.0 ** (-self.h_low))

    def to_dict(self) -> dict:
        return {
            "h_inf": self.h_inf,
            "h_max": self.h_max,
            "estimator": self.estimator.value,
            "c": self.overlap.c,
            "s0": self.overlap.s0,
            "delta_q": self.overlap.dq,
            "delta_p": self.overlap.dp,
            "h_low": self.h_low,
            "tail_error": self.tail_error,
            "n_check": self.n_check,
        }


def min_entropy_lower_bound(
    dq: float,
    dp: float,
    h_max: float,
    *,
    h_inf: Optional[float] = None,
    estimator="exact",
    tail_error: float = 0.0,
    n_check: int = 0,
) -> EntropyReport:
    """Bound ``h_low = -log2 c(dq, dp) - h_max`` packaged as an :class:`EntropyReport`."""
    if not h_max >= 0:
        raise InvalidParameterError(f"h_max must be >= 0, got {h_max}")
    overlap = overlap_constant(dq, dp)
    return EntropyReport(
        h_inf=h_inf,
        h_max=float(h_max),
        estimator=Estimator(estimator),
        overlap=overlap,
        h_low=overlap.neg_log2 - float(h_max),
        tail_error=float(tail_error),
        n_check=int(n_check),
    )


def exact_report(var_p: float, var_q: float, partition: Partition) -> EntropyReport:
    """Bound evaluated on exact binned distributions of both quadratures."""
    from .states import bin_probabilities

    p_dist = bin_probabilities(var_p, partition)
    q_dist = bin_probabilities(var_q, partition)
    return min_entropy_lower_bound(
        partition.delta,
        partition.delta,
        max_entropy(q_dist),
        h_inf=classical_min_entropy(p_dist),
        estimator=Estimator.EXACT,
    )


def jacobi_theta3(q: float) -> float:
    """``theta_3(0, q) = 1 + 2 sum_{n>=1} q**(n**2)`` for ``0 <= q < 1``.

    For ``q = exp(-a)`` with ``a < pi`` the modular transform
    ``theta_3(0, e^-a) = sqrt(pi/a) theta_3(0, e^(-pi**2/a))`` is applied first.
    """
    if not 0 <= q < 1:
        raise InvalidParameterError("nome must satisfy 0 <= q < 1")
    if q == 0:
        return 1.0
    a = -math.log(q)
    prefactor = 1.0
    if a < math.pi:
        prefactor = math.sqrt(math.pi / a)
        a = math.pi**2 / a
    n = np.arange(1, int(math.sqrt(745 / a)) + 2)
    return prefactor * float(1 + 2 * np.exp(-a * n * n).sum())


@dataclass(frozen=True)
class AnalyticEntropies:
    h_inf_approx: float
    h_low_approx: float
    asymptotic_gap: float


def analytic_entropies(mu: float, delta: float) -> AnalyticEntropies:
    """Fine-resolution closed forms for a thermal state of mean photon number ``mu``.

    Valid for ``delta`` small against the standard deviation
    ``sqrt(1/2 + mu)``; an :class:`AccuracyWarning` is issued otherwise.
    """
    if not mu >= 0:
        raise InvalidParameterError("mu must be >= 0")
    if not delta > 0:
        raise InvalidParameterError("delta must be > 0")
    width = 1 + 2 * mu
    if delta > math.sqrt(width / 2):
        warnings.warn(
            f"delta={delta:g} exceeds the standard deviation; closed forms are inaccurate",
            AccuracyWarning,
            stacklevel=2,
        )
    h_inf = -math.log2(delta / math.sqrt(math.pi * width))
    theta = jacobi_theta3(math.exp(-delta**2 / (2 * width)))
    h_low = h_inf - 2 * math.log2(delta / math.sqrt(2 * math.pi) * theta)
    return AnalyticEntropies(h_inf, h_low, math.log2(width))


def tail_error_bound(sigma: float, partition: Partition, n: int) -> float:
    """Bound ``sqrt(N) P_M`` on the max-entropy terms lost beyond ``+-p_max``.

    ``P_M`` is the two-sided Gaussian tail mass outside the partition range.
    """
    if n < 1:
        raise InvalidParameterError("sample count must be >= 1")
    if not sigma > 0:
        raise InvalidParameterError("sigma must be > 0")
    tail = 2 * ndtr(-partition.p_max / sigma)
    return float(math.sqrt(n) * tail)
