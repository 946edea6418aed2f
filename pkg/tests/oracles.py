"""Reference implementations used as test oracles.

Each one follows the textbook definition with a different numerical method
from the production code: adaptive quadrature instead of error functions, a
Nystrom discretisation of the sinc kernel instead of spheroidal series,
explicit loops instead of packed bit arithmetic.
"""

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.linalg import eigh


def gaussian_mass(variance, a, b):
    """Mass of N(0, variance) on (a, b] by adaptive quadrature."""
    s = math.sqrt(variance)

    def pdf(x):
        return math.exp(-x * x / (2 * variance)) / (s * math.sqrt(2 * math.pi))

    if a == -math.inf and b == math.inf:
        return 1.0
    if a == -math.inf:
        return 0.5 - gaussian_mass(variance, b, 0.0) if b < 0 else 0.5 + gaussian_mass(variance, 0.0, b)
    if b == math.inf:
        return 1.0 - gaussian_mass(variance, -math.inf, a)
    val, _ = integrate.quad(pdf, a, b, epsabs=0, epsrel=1e-13, limit=200)
    return val


def sinc_kernel_eigenvalue(bandwidth, nodes=80):
    """Largest eigenvalue of the time-and-band limiting operator.

    ``int_{-1}^{1} sin(c (x - y)) / (pi (x - y)) f(y) dy = lambda f(x)``
    discretised on Gauss-Legendre nodes (symmetrised Nystrom method).
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    d = x[:, None] - x[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(d == 0, bandwidth / math.pi, np.sin(bandwidth * d) / (math.pi * d))
    sw = np.sqrt(w)
    return float(eigh(sw[:, None] * k * sw[None, :], eigvals_only=True)[-1])


def renyi_half(p):
    total = 0.0
    for v in p:
        total += math.sqrt(v)
    return 2 * math.log2(total)


def naive_hash(x, dense):
    """``y_j = XOR_i x_i M_ij`` bit by bit."""
    n, l = dense.shape
    out = []
    for j in range(l):
        acc = 0
        for i in range(n):
            acc ^= int(x[i]) & int(dense[i, j])
        out.append(acc)
    return np.array(out, dtype=np.uint8)


def colex_subsets(m, k):
    """All k-subsets of range(m) in colexicographic order."""
    subs = list(itertools.combinations(range(m), k))
    return sorted(subs, key=lambda s: tuple(reversed(s)))


def naive_autocorrelation(x, lag):
    x = np.asarray(x, dtype=float) - np.mean(x)
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x)) if lag else 1.0
