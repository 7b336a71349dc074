import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from artifact.errors import InvalidPairing
from artifact.kernels import DiracSpace, FiniteAtomic, RieszRadial, cosine_atoms
from artifact.strat_bound import (NormTriple, base_case_printed_bound, bound_domination_check,
                                  full_range_norms, lemma_a1, lemma_a1_oscillatory, lemma_a2,
                                  lemma_a2_closed, lemma_a3_rate, norm0, norm1,
                                  theorem3_certificate)
from artifact.wick import PairPartition, enumerate_pairings


def single_integral_delta(theta, a0):
    # the xi-integral of ((theta + lam)^2 + xi^2)^-1 / 2 pi is 1 / (2 (theta + lam)), and
    # int lam^(a0-1) / (theta + lam) d lam = Gamma(a0) Gamma(1-a0) theta^(a0-1)
    return 0.5 * math.gamma(1 - a0) * theta ** (a0 - 1)


@pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("a0", [0.3, 0.5, 0.8])
def test_single_integral_delta(theta, a0):
    ref = single_integral_delta(theta, a0)
    assert lemma_a1(theta, DiracSpace(), a0) == pytest.approx(ref, rel=1e-9)
    assert norm1(theta, DiracSpace(), a0) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("theta", [0.7, 2.0])
def test_single_integral_atomic_two_routes(theta):
    m = FiniteAtomic(atoms=(((0.5,), 0.3), ((-0.5,), 0.3), ((2.0,), 1.0)), d=1)
    assert lemma_a1_oscillatory(theta, m, 0.5) == pytest.approx(lemma_a1(theta, m, 0.5), rel=1e-7)


def test_norm0():
    assert norm0(2.5) == pytest.approx(2.5 ** -2)


def test_pair_integral_closed_vs_direct():
    r = lemma_a2(1.0, DiracSpace(), 0.5)
    assert r.closed == pytest.approx(r.direct, rel=1e-3)
    assert r.closed == pytest.approx(math.gamma(0.5) / 4, rel=1e-9)


def test_pair_integral_atomic_closed_vs_direct():
    r = lemma_a2(1.5, cosine_atoms(1.0), 0.5)
    assert r.closed == pytest.approx(r.direct, rel=1e-3)


def test_decay_slope_delta_and_riesz():
    thetas = (4.0, 8.0, 16.0, 32.0)
    assert lemma_a3_rate(thetas, DiracSpace(), 0.5) == pytest.approx(-2.5, abs=1e-6)
    assert lemma_a3_rate(thetas, RieszRadial(0.6), 0.5) == pytest.approx(0.6 + 0.5 - 4, abs=1e-6)
    with pytest.raises(ValueError):
        lemma_a3_rate((2.0, 2.0), DiracSpace(), 0.5)


def all_configurations(max_n=4):
    for n in range(1, max_n + 1):
        for p in enumerate_pairings(n):
            for n1 in range(2 * n + 1):
                yield n, n1, p


def test_certificates_up_to_order_eight():
    unit = NormTriple(1.0, {"*": 1.0}, {"*": 1.0})
    count = 0
    for n, n1, p in all_configurations():
        cert = theorem3_certificate(n1, 2 * n - n1, p, unit)
        cert.check(n)
        assert len(cert.q0) == len(cert.q1)
        assert len(cert.q2) % 2 == 0
        assert len(cert.q0) + len(cert.q2) // 2 == n
        count += 1
    assert count == 1068


@given(a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0), c=st.floats(0.1, 3.0),
       idx=st.integers(0, 1067))
@settings(max_examples=40, deadline=None)
def test_bound_is_product_over_roles(a, b, c, idx):
    n, n1, p = list(all_configurations())[idx]
    cert = theorem3_certificate(n1, 2 * n - n1, p, NormTriple(a, {"*": b}, {"*": c}))
    ref = a ** len(cert.q0) * (2 * b) ** len(cert.q1) * c ** len(cert.q2)
    assert cert.bound == pytest.approx(ref, rel=1e-12)
    if cert.tight_bound is not None:
        assert cert.tight_bound <= cert.bound
    json.dumps(cert.record())


def test_pair_roles():
    cert = theorem3_certificate(1, 1, PairPartition(((1, 2),)), NormTriple(1.0, {"*": 1.0}, {"*": 1.0}))
    assert cert.q2 == {1, 2} and not cert.q0
    cert = theorem3_certificate(2, 0, PairPartition(((1, 2),)), NormTriple(1.0, {"*": 1.0}, {"*": 1.0}))
    assert cert.q0 == {1} and cert.q1 == {2}
    cert = theorem3_certificate(0, 2, PairPartition(((1, 2),)), NormTriple(1.0, {"*": 1.0}, {"*": 1.0}))
    assert cert.q0 == {1} and cert.q1 == {2}


def test_certificate_input_errors():
    unit = NormTriple(1.0, {"*": 1.0}, {"*": 1.0})
    with pytest.raises(InvalidPairing):
        theorem3_certificate(1, 2, PairPartition(((1, 2),)), unit)
    with pytest.raises(InvalidPairing):
        theorem3_certificate(2, 2, PairPartition(((1, 2),)), unit)


@pytest.mark.parametrize("case", [(1, 1), (2, 0), (0, 2)])
@pytest.mark.parametrize("theta", [(1.0, 1.0), (1.0, 2.0), (0.5, 4.0)])
def test_base_cases_dominated(case, theta):
    dom = bound_domination_check(case, theta, DiracSpace(), 0.5)
    assert 0 < dom.lhs <= dom.bound * (1 + 1e-3)


def test_swapped_base_case_assignment_fails():
    # with the roles of the two leaves swapped, the (0, 2) bound is violated
    lhs = bound_domination_check((0, 2), (0.5, 4.0), DiracSpace(), 0.5).lhs
    assert base_case_printed_bound(0.5, 4.0, DiracSpace(), 0.5) < lhs


def test_full_range_norms_keys():
    p = PairPartition(((1, 3), (2, 4)))
    nt = full_range_norms(1.0, DiracSpace(), 0.5, p)
    assert set(nt.norm1) == {(1, 3), (2, 4)} and nt.norm0 == 1.0
