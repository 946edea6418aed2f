"""Gaussian source models, ADC partitions and binned quadrature statistics.

Quadrature variances are dimensionless with the vacuum (shot-noise) variance
equal to 1/2. A :class:`Partition` describes the discretisation applied by the
analog-to-digital converter: ``2**bit_depth`` steps of width ``delta`` spanning
``[-p_max, p_max]`` plus two overflow outcomes labelled ``-(M+1)`` and ``M+1``.

Two bin layouts are supported:

* ``centered=True`` (default): bin ``k`` is ``((k-1/2)delta, (k+1/2)delta]``
  for ``k = -M..M``, clipped to ``[-p_max, p_max]`` so the two edge bins are
  half-width. Bin 0 is centred on the origin and the layout is symmetric.
* ``centered=False``: bin ``k`` is ``(k delta, (k+1) delta]`` for
  ``k = -M..M-1``, the mid-riser layout of a two's-complement ADC.

Outcome labels always run over ``-(M+1)..M+1``; in the mid-riser layout the
label ``M`` is unused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.special import ndtr

from .errors import (
    EmptyBlockError,
    InvalidDistributionError,
    InvalidParameterError,
)
from .seeding import SeedLike, rng_from_seed, seed_to_int

NORMALISATION_TOL = 1e-12


class Quadrature(str, Enum):
    """Field quadrature selected by the local-oscillator phase."""

    P = "P"  # momentum, data quadrature
    Q = "Q"  # position, check quadrature


class StateKind(str, Enum):
    VACUUM = "vacuum"
    THERMAL = "thermal"
    SQUEEZED = "squeezed"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class GaussianState:
    """Single-mode Gaussian state described by its two quadrature variances.

    Use the classmethod constructors rather than the raw initialiser.

    Attributes
    ----------
    kind : StateKind
    parameter : float
        Mean photon number (thermal), squeezing factor (squeezed), measured
        variance (empirical) or 0 (vacuum).
    var_p, var_q : float
        Momentum and position quadrature variances in vacuum units.
    """

    kind: StateKind
    parameter: float
    var_p: float
    var_q: float

    def __post_init__(self):
        if not (self.var_p > 0 and self.var_q > 0):
            raise InvalidParameterError("quadrature variances must be positive")
        if self.var_p * self.var_q < 0.25 * (1 - 1e-12):
            raise InvalidParameterError(
                "variances violate the uncertainty relation var_p * var_q >= 1/4"
            )

    @classmethod
    def vacuum(cls) -> "GaussianState":
        return cls(StateKind.VACUUM, 0.0, 0.5, 0.5)

    @classmethod
    def thermal(cls, mu: float) -> "GaussianState":
        if not mu >= 0:
            raise InvalidParameterError(f"mean photon number must be >= 0, got {mu}")
        return cls(StateKind.THERMAL, float(mu), 0.5 + mu, 0.5 + mu)

    @classmethod
    def squeezed(cls, zeta: float) -> "GaussianState":
        """Position-squeezed vacuum: var_p = zeta**2/2, var_q = 1/(2 zeta**2)."""
        if not zeta > 0:
            raise InvalidParameterError(f"squeezing factor must be > 0, got {zeta}")
        return cls(StateKind.SQUEEZED, float(zeta), zeta**2 / 2, 1 / (2 * zeta**2))

    @classmethod
    def empirical(cls, variance: float) -> "GaussianState":
        """Thermal-like state reproducing a measured quadrature variance."""
        if not variance > 0:
            raise InvalidParameterError(f"variance must be > 0, got {variance}")
        return cls(StateKind.EMPIRICAL, float(variance), float(variance), float(variance))

    def variance(self, quadrature) -> float:
        return self.var_p if Quadrature(quadrature) is Quadrature.P else self.var_q

    @property
    def is_pure(self) -> bool:
        return math.isclose(self.var_p * self.var_q, 0.25, rel_tol=1e-12)

    def describe(self) -> dict:
        return {
            "kind": self.kind.value,
            "parameter": self.parameter,
            "var_p": self.var_p,
            "var_q": self.var_q,
        }

    @classmethod
    def from_description(cls, desc: dict) -> "GaussianState":
        kind = StateKind(desc["kind"])
        if kind is StateKind.VACUUM:
            return cls.vacuum()
        if kind is StateKind.THERMAL:
            return cls.thermal(desc["parameter"])
        if kind is StateKind.SQUEEZED:
            return cls.squeezed(desc["parameter"])
        return cls.empirical(desc["parameter"])


@dataclass(frozen=True)
class Partition:
    """Uniform discretisation of the quadrature axis.

    Attributes
    ----------
    delta : float
        Bin width.
    max_index : int
        ``M``; the interior range is ``[-M delta, M delta] = [-p_max, p_max]``.
    centered : bool
        Bin layout, see module docstring.
    bit_depth : int or None
        ADC resolution ``j`` when the partition was built from one, in which
        case ``max_index == 2**(j-1)``.
    """

    delta: float
    max_index: int
    centered: bool = True
    bit_depth: Optional[int] = None

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise InvalidParameterError(f"bin width must be positive, got {self.delta}")
        if self.max_index < 1:
            raise InvalidParameterError("max_index must be >= 1")
        if self.bit_depth is not None:
            if not 1 <= self.bit_depth <= 16:
                raise InvalidParameterError("bit_depth must lie in 1..16")
            if self.max_index != 2 ** (self.bit_depth - 1):
                raise InvalidParameterError("max_index must equal 2**(bit_depth-1)")

    @classmethod
    def from_bits(cls, bit_depth: int, p_max: float, centered: bool = True) -> "Partition":
        """ADC partition: ``delta = p_max * 2**(1 - bit_depth)``."""
        if not 1 <= int(bit_depth) <= 16:
            raise InvalidParameterError("bit_depth must lie in 1..16")
        if not p_max > 0:
            raise InvalidParameterError(f"p_max must be positive, got {p_max}")
        j = int(bit_depth)
        return cls(p_max * 2.0 ** (1 - j), 2 ** (j - 1), centered, j)

    @classmethod
    def from_width(cls, delta: float, p_max: float, centered: bool = True) -> "Partition":
        """Partition of width ``delta`` whose range covers at least ``[-p_max, p_max]``."""
        if not (delta > 0 and p_max > 0):
            raise InvalidParameterError("delta and p_max must be positive")
        return cls(float(delta), max(1, math.ceil(p_max / delta - 1e-9)), centered)

    @property
    def p_max(self) -> float:
        return self.delta * self.max_index

    @property
    def edges(self) -> np.ndarray:
        """Finite bin boundaries in increasing order (overflow bins excluded)."""
        M, d = self.max_index, self.delta
        if self.centered:
            inner = (np.arange(-M, M) + 0.5) * d
            return np.concatenate([[-M * d], inner, [M * d]])
        return np.arange(-M, M + 1) * d

    @property
    def labels(self) -> np.ndarray:
        """Outcome labels aligned with probability vectors (overflow first/last)."""
        M = self.max_index
        top = M + 1 if self.centered else M
        return np.concatenate([[-(M + 1)], np.arange(-M, top), [M + 1]]).astype(np.int64)

    @property
    def n_interior(self) -> int:
        return 2 * self.max_index + (1 if self.centered else 0)

    @property
    def n_outcomes(self) -> int:
        return self.n_interior + 2

    def label_to_position(self, labels) -> np.ndarray:
        """Map outcome labels to positions in :attr:`labels`."""
        labels = np.asarray(labels, dtype=np.int64)
        M = self.max_index
        pos = labels + M + 1
        if not self.centered:
            pos = np.where(labels == M + 1, 2 * M + 1, pos)
        return pos

    def digitize(self, values) -> np.ndarray:
        """Labels of the half-open bins ``(a, b]`` containing ``values``."""
        pos = np.searchsorted(self.edges, np.asarray(values, dtype=float), side="left")
        return self.labels[pos]

    def describe(self) -> dict:
        return {
            "delta": self.delta,
            "max_index": self.max_index,
            "p_max": self.p_max,
            "centered": self.centered,
            "bit_depth": self.bit_depth,
        }

    @classmethod
    def from_description(cls, desc: dict) -> "Partition":
        return cls(desc["delta"], desc["max_index"], desc["centered"], desc.get("bit_depth"))


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Outcome statistics over a partition, as probabilities or as counts.

    Exactly one of ``probs`` and ``counts`` is set; entries are aligned with
    ``partition.labels``.
    """

    partition: Partition
    probs: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.probs is None) == (self.counts is None):
            raise InvalidDistributionError("give exactly one of probs or counts")
        n = self.partition.n_outcomes
        if self.probs is not None:
            p = np.asarray(self.probs, dtype=float)
            if p.shape != (n,):
                raise InvalidDistributionError(f"expected {n} probabilities, got {p.shape}")
            if np.any(p < 0) or not np.all(np.isfinite(p)):
                raise InvalidDistributionError("probabilities must be finite and >= 0")
            if abs(p.sum() - 1.0) > NORMALISATION_TOL:
                raise InvalidDistributionError(f"probabilities sum to {p.sum()!r}, not 1")
            p.setflags(write=False)
            object.__setattr__(self, "probs", p)
        else:
            c = np.asarray(self.counts)
            if c.shape != (n,):
                raise InvalidDistributionError(f"expected {n} counts, got {c.shape}")
            if not np.issubdtype(c.dtype, np.integer):
                if not np.all(c == np.round(c)):
                    raise InvalidDistributionError("counts must be integers")
            c = c.astype(np.int64)
            if np.any(c < 0):
                raise InvalidDistributionError("counts must be non-negative")
            c.setflags(write=False)
            object.__setattr__(self, "counts", c)

    @property
    def is_counts(self) -> bool:
        return self.counts is not None

    @property
    def total(self) -> int:
        if self.counts is None:
            raise InvalidDistributionError("probability-form distribution has no total")
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        """Probabilities, or relative frequencies of a count-form distribution."""
        if self.probs is not None:
            return self.probs
        N = self.total
        if N == 0:
            raise InvalidDistributionError("no counts")
        return self.counts / N

    def prob_of(self, label: int) -> float:
        return float(self.frequencies()[self.partition.label_to_position(label)])

    @classmethod
    def from_symbols(cls, partition: Partition, symbols) -> "DiscreteDistribution":
        pos = partition.label_to_position(symbols)
        return cls(partition, counts=np.bincount(pos, minlength=partition.n_outcomes))


@dataclass(frozen=True, eq=False)
class SampleBlock:
    """Quantised quadrature outcomes with their measurement basis.

    ``tags`` holds 0 for data (P) and 1 for check (Q) measurements.
    """

    partition: Partition
    symbols: np.ndarray
    tags: np.ndarray
    source: dict = field(default_factory=dict)

    DATA = 0
    CHECK = 1

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.int32)
        tags = np.asarray(self.tags, dtype=np.uint8)
        if sym.ndim != 1 or tags.shape != sym.shape:
            raise InvalidParameterError("symbols and tags must be 1-d of equal length")
        M = self.partition.max_index
        if sym.size and (sym.min() < -(M + 1) or sym.max() > M + 1):
            raise InvalidParameterError("symbol outside the partition's label range")
        if tags.size and tags.max() > 1:
            raise InvalidParameterError("tags must be 0 (data) or 1 (check)")
        sym.setflags(write=False)
        tags.setflags(write=False)
        object.__setattr__(self, "symbols", sym)
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def counts(self, tag: Optional[int] = None) -> DiscreteDistribution:
        sym = self.symbols if tag is None else self.symbols[self.tags == tag]
        return DiscreteDistribution.from_symbols(self.partition, sym)

    def data_symbols(self) -> np.ndarray:
        return self.symbols[self.tags == self.DATA]

    def check_symbols(self) -> np.ndarray:
        return self.symbols[self.tags == self.CHECK]

    def retag(self, check_indices) -> "SampleBlock":
        """Copy of the block where only ``check_indices`` are check outcomes."""
        tags = np.zeros(len(self), dtype=np.uint8)
        tags[np.asarray(check_indices, dtype=np.int64)] = self.CHECK
        return SampleBlock(self.partition, self.symbols, tags, dict(self.source))

    def slice(self, start: int, stop: int) -> "SampleBlock":
        return SampleBlock(self.partition, self.symbols[start:stop], self.tags[start:stop],
                           dict(self.source))


def _gaussian_bin_masses(variance: float, edges: np.ndarray) -> np.ndarray:
    """Masses of (-inf, e0], (e0, e1], ..., (e_last, inf) for N(0, variance).

    Bins in the upper half use survival-function differences so that tail
    masses keep full relative precision.
    """
    z = edges / math.sqrt(variance)
    lo = np.concatenate([[-np.inf], z])
    hi = np.concatenate([z, [np.inf]])
    upper = lo >= 0
    masses = np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))
    return np.clip(masses, 0.0, None)


def bin_probabilities(variance: float, partition: Partition) -> DiscreteDistribution:
    """Exact outcome distribution of a zero-mean Gaussian quadrature.

    Parameters
    ----------
    variance : float
        Quadrature variance in vacuum units.
    partition : Partition

    Returns
    -------
    DiscreteDistribution
        Probability form, overflow bins included.
    """
    if not (variance > 0 and math.isfinite(variance)):
        raise InvalidParameterError(f"variance must be positive, got {variance}")
    masses = _gaussian_bin_masses(float(variance), partition.edges)
    # float rounding of the ndtr differences; the error is far below the tolerance
    masses = masses / masses.sum()
    return DiscreteDistribution(partition, probs=masses)


def sample_quadrature(
    state: GaussianState,
    quadrature,
    partition: Partition,
    count: int,
    seed: SeedLike,
) -> SampleBlock:
    """Simulate ``count`` homodyne outcomes digitised by ``partition``.

    Continuous Gaussian outcomes are drawn with a PCG64 generator seeded from
    ``seed`` and then binned, so the result is a deterministic function of the
    seed.
    """
    if count < 1:
        raise EmptyBlockError("count must be >= 1")
    quadrature = Quadrature(quadrature)
    rng = rng_from_seed(seed)
    x = rng.normal(0.0, math.sqrt(state.variance(quadrature)), size=int(count))
    symbols = partition.digitize(x).astype(np.int32)
    tag = SampleBlock.CHECK if quadrature is Quadrature.Q else SampleBlock.DATA
    tags = np.full(symbols.size, tag, dtype=np.uint8)
    meta = {"state": state.describe(), "seed": seed_to_int(seed), "quadrature": quadrature.value}
    return SampleBlock(partition, symbols, tags, meta)


def squeezed_thermal_pair(zeta: float) -> Tuple[GaussianState, GaussianState]:
    """Squeezed state and the thermal state with the same momentum statistics.

    The thermal twin has ``mu = sinh(xi)**2`` with ``2 sinh(xi)**2 = zeta**2 - 1``.
    """
    if not zeta > 1:
        raise InvalidParameterError(
            f"zeta must exceed 1 so that momentum is anti-squeezed, got {zeta}"
        )
    return GaussianState.squeezed(zeta), GaussianState.thermal((zeta**2 - 1) / 2)
