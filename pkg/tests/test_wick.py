import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.errors import DimensionMismatch, InvalidPairing, NotPSD, OrderTooLarge
from artifact.wick import (PairPartition, enumerate_pairings, pairing_count, psd_factor,
                           wick_mc_crosscheck, wick_moment, wick_moment_enumerated)


@pytest.mark.parametrize("n,count", [(1, 1), (2, 3), (3, 15), (4, 105), (5, 945)])
def test_pairing_counts(n, count):
    ps = enumerate_pairings(n)
    assert len(ps) == count == pairing_count(n)
    assert len({p.pairs for p in ps}) == count


def test_pairings_are_valid_and_ordered():
    for p in enumerate_pairings(3):
        assert p.pairs[0][0] == 1
        firsts = [a for a, _ in p.pairs]
        assert firsts == sorted(firsts)


def test_enumeration_guard():
    with pytest.raises(OrderTooLarge):
        enumerate_pairings(9)


def test_invalid_pairings():
    with pytest.raises(InvalidPairing):
        PairPartition(((1, 2), (2, 3)))
    with pytest.raises(InvalidPairing):
        PairPartition(((2, 1),))
    assert PairPartition(((1, 3), (2, 4))).partner(3) == 1


@pytest.mark.parametrize("size,val", [(2, 1.0), (4, 3.0), (6, 15.0), (8, 105.0)])
def test_all_ones_moments(size, val):
    assert wick_moment(np.ones((size, size))) == val


def test_odd_moment_vanishes():
    assert wick_moment(np.eye(3)) == 0.0


def test_isserlis_four():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    c = a @ a.T
    ref = c[0, 1] * c[2, 3] + c[0, 2] * c[1, 3] + c[0, 3] * c[1, 2]
    assert wick_moment(c) == pytest.approx(ref, rel=1e-13)


@given(seed=st.integers(0, 10_000), half=st.integers(1, 4))
@settings(max_examples=25, deadline=None)
def test_hafnian_recursion_matches_enumeration(seed, half):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2 * half, 2 * half))
    c = a @ a.T
    assert wick_moment(c) == pytest.approx(wick_moment_enumerated(c), rel=1e-10, abs=1e-12)


def test_gaussian_power_moments():
    # E g^(2n) = (2n-1)!! for a standard normal
    for n in range(1, 6):
        assert wick_moment(np.ones((2 * n, 2 * n))) == math.prod(range(1, 2 * n, 2))


def test_shape_errors():
    with pytest.raises(DimensionMismatch):
        wick_moment(np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        wick_moment(np.array([[1.0, 0.5], [0.2, 1.0]]))
    with pytest.raises(NotPSD):
        psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


@pytest.mark.parametrize("size", [4, 6])
def test_mc_crosscheck(size):
    r = wick_mc_crosscheck(np.ones((size, size)), 100_000, 11)
    assert abs(r.mc - r.exact) <= 4 * r.stderr


def test_mc_crosscheck_deterministic():
    c = np.eye(4) + 0.3
    assert wick_mc_crosscheck(c, 1000, 5) == wick_mc_crosscheck(c, 1000, 5)
