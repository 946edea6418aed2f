"""Zeroth prolate spheroidal functions via Legendre expansions.

The angular function ``S_00(c, eta) = sum_r d_r P_r(eta)`` (even ``r``) has
expansion coefficients that form the eigenvector of a symmetric tridiagonal
matrix whose lowest eigenvalue is the separation constant. The radial
function of the first kind then follows from the spherical-Bessel series

    R_00(c, xi) = sum_r (-1)**(r/2) d_r j_r(c xi) / sum_r d_r

(Flammer normalisation, ``R_00(c, xi) -> j_0(c xi)`` as ``c -> 0``).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import spherical_jn

from .errors import InvalidParameterError


def _n_terms(c: float) -> int:
    return int(max(24, 2 * c + 40))


def legendre_coefficients(c: float, n_terms: int | None = None):
    """Separation constant and even-order Legendre coefficients of ``S_00``.

    Returns
    -------
    chi : float
        Lowest eigenvalue of the spheroidal equation
        ``((1 - eta**2) S')' + (chi - c**2 eta**2) S = 0``.
    d : ndarray
        Coefficients ``d_0, d_2, d_4, ...`` normalised so that ``d_0 > 0``.
    """
    if not c >= 0:
        raise InvalidParameterError(f"bandwidth parameter must be >= 0, got {c}")
    K = n_terms or _n_terms(c)
    r = 2.0 * np.arange(K)
    c2 = c * c
    diag = r * (r + 1) + c2 * (2 * r * r + 2 * r - 1) / ((2 * r - 1) * (2 * r + 3))
    rr = r[:-1]
    off = c2 * (rr + 1) * (rr + 2) / ((2 * rr + 3) * np.sqrt((2 * rr + 1) * (2 * rr + 5)))
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    d = v[:, 0] * np.sqrt((2 * r + 1) / 2)
    if d[0] < 0:
        d = -d
    return float(w[0]), d


def radial_s0(c: float, xi: float = 1.0) -> float:
    """Radial prolate spheroidal function of the first kind, ``R_00(c, xi)``."""
    if not xi >= 1:
        raise InvalidParameterError("radial coordinate must satisfy xi >= 1")
    if c == 0:
        return 1.0
    _, d = legendre_coefficients(c)
    r = 2 * np.arange(d.size)
    signs = np.where((r // 2) % 2 == 0, 1.0, -1.0)
    return float(np.sum(signs * d * spherical_jn(r, c * xi)) / np.sum(d))


@lru_cache(maxsize=4096)
def concentration_eigenvalue(c: float) -> float:
    """Largest time-frequency concentration eigenvalue ``(2c/pi) R_00(c, 1)**2``."""
    return float(2 * c / np.pi * radial_s0(c, 1.0) ** 2)
