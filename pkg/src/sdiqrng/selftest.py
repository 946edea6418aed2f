"""Fast invariant checks behind ``sdiqrng selftest``."""

from __future__ import annotations

import itertools
import math
from typing import Callable, List, Tuple

import numpy as np

from .combinatorics import seed_cost, unrank_combination
from .entropy import exact_report, overlap_constant, tail_error_bound
from .extractor import HashMatrix, hash_block, output_length
from .protocol import secure_rate
from .states import Partition


def _overlap_limit() -> Tuple[bool, str]:
    ratios = [overlap_constant(d, d).c / (d * d / (2 * math.pi)) for d in (1e-3, 1e-2)]
    cs = [overlap_constant(d, d).c for d in np.arange(0.05, 0.6001, 0.05)]
    # c approaches the small-width limit from below, so only closeness is checked
    ok = all(abs(r - 1) <= 1e-3 for r in ratios) and bool(np.all(np.diff(cs) > 0))
    return ok, f"c/(d^2/2pi) = {ratios[0]:.9f}, {ratios[1]:.9f}"


def _vacuum_gap() -> Tuple[bool, str]:
    rep = exact_report(0.5, 0.5, Partition.from_width(0.01, 12 * math.sqrt(0.5)))
    gap = rep.h_inf - rep.h_low
    return gap <= 0.02, f"h_inf - h_low = {gap:.2e}"


def _unranking() -> Tuple[bool, str]:
    for m in range(1, 9):
        for k in range(1, m + 1):
            got = [tuple(unrank_combination(r, m, k)) for r in range(math.comb(m, k))]
            want = sorted(itertools.combinations(range(m), k), key=lambda c: c[::-1])
            if got != want:
                return False, f"mismatch at m={m}, k={k}"
    return True, "colex bijection for m <= 8"


def _hashing() -> Tuple[bool, str]:
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, l = int(rng.integers(1, 65)), int(rng.integers(1, 33))
        dense = rng.integers(0, 2, size=(n, l), dtype=np.uint8)
        x = rng.integers(0, 2, size=n, dtype=np.uint8)
        want = np.array([sum(int(x[j]) * int(dense[j, i]) for j in range(n)) % 2 for i in range(l)])
        if not np.array_equal(hash_block(x, HashMatrix.from_dense(dense)), want):
            return False, f"mismatch for n={n}, l={l}"
    return True, "50 random instances"


def _rates() -> Tuple[bool, str]:
    r = secure_rate(615514112, 24810, 1.3629, seed_cost(615514112, 24810))
    l = output_length(10000, 1.3629, 5)
    return 1.360 <= r <= 1.363 and l == 2725, f"r_sec = {r:.5f}, l = {l}"


def _tail() -> Tuple[bool, str]:
    part = Partition.from_bits(5, 10.5)
    t = tail_error_bound(1.0, part, 25_000)
    return t <= 1e-20, f"tail error = {t:.3e}"


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("overlap small-width limit", _overlap_limit),
    ("vacuum gap", _vacuum_gap),
    ("unranking", _unranking),
    ("hashing", _hashing),
    ("rates", _rates),
    ("tail bound", _tail),
]


def run_selftest() -> List[Tuple[str, bool, str]]:
    out = []
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # report, do not abort the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
