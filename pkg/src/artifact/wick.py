"""Pair partitions and Wick's formula for Gaussian product moments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, InvalidPairing, NotPSD, OrderTooLarge

MAX_ORDER = 8


@dataclass(frozen=True)
class PairPartition:
    """n disjoint pairs (j, k), j < k, covering 1..2n (1-based)."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(tuple(int(i) for i in p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        flat = [i for p in pairs for i in p]
        if any(len(p) != 2 or p[0] >= p[1] for p in pairs):
            raise InvalidPairing("each pair must be (j, k) with j < k")
        if sorted(flat) != list(range(1, 2 * len(pairs) + 1)):
            raise InvalidPairing("pairs must cover 1..2n exactly once")

    @property
    def n(self) -> int:
        return len(self.pairs)

    def partner(self, i: int) -> int:
        for j, k in self.pairs:
            if i == j:
                return k
            if i == k:
                return j
        raise InvalidPairing(f"index {i} not in pairing")


def pairing_count(n: int) -> int:
    return math.factorial(2 * n) // (2 ** n * math.factorial(n))


def _pairings(items: tuple):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for tail in _pairings(remaining):
            yield ((first, other),) + tail


@lru_cache(maxsize=None)
def _enumerate(n: int) -> tuple:
    return tuple(PairPartition(p) for p in _pairings(tuple(range(1, 2 * n + 1))))


def enumerate_pairings(n: int) -> list:
    """All pairings of {1..2n}, smallest unpaired index first."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_ORDER:
        raise OrderTooLarge(f"n = {n} exceeds the enumeration guard {MAX_ORDER}")
    return list(_enumerate(n))


def _hafnian(cov: np.ndarray, idx: tuple) -> float:
    # same recursion as the enumeration, without materialising the pairings
    if not idx:
        return 1.0
    first, rest = idx[0], idx[1:]
    total = 0.0
    for i, other in enumerate(rest):
        c = cov[first, other]
        if c != 0.0:
            total += c * _hafnian(cov, rest[:i] + rest[i + 1:])
    return total


def wick_moment(cov) -> float:
    """E[g_1 ... g_m] for centred Gaussians with covariance cov."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatch("cov must be a square matrix")
    m = cov.shape[0]
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
        raise DimensionMismatch("cov must be symmetric")
    if m % 2:
        return 0.0
    if m // 2 > MAX_ORDER:
        raise OrderTooLarge(f"order {m // 2} exceeds the guard {MAX_ORDER}")
    return float(_hafnian(cov, tuple(range(m))))


def wick_moment_enumerated(cov) -> float:
    """Same sum, taken literally over enumerate_pairings."""
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0]
    if m % 2:
        return 0.0
    return float(sum(math.prod(cov[j - 1, k - 1] for j, k in p.pairs)
                     for p in enumerate_pairings(m // 2)))


class WickMC(NamedTuple):
    exact: float
    mc: float
    stderr: float


def psd_factor(cov, tol: float = 1e-10) -> np.ndarray:
    """L with L L^T = cov, via eigendecomposition (allows singular cov)."""
    cov = np.asarray(cov, dtype=float)
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(np.diag(cov)))))
    if w.min() < -tol * scale:
        raise NotPSD(f"min eigenvalue {w.min():.3e}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def wick_mc_crosscheck(cov, m: int, seed: int) -> WickMC:
    """Exact Wick moment against a Monte Carlo mean of prod g_k."""
    cov = np.asarray(cov, dtype=float)
    exact = wick_moment(cov)
    L = psd_factor(cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, cov.shape[0]))
    prod = np.prod(z @ L.T, axis=1)
    return WickMC(exact, float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(m)))
