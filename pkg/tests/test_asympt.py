import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from artifact.asympt import (RateInputs, gamma_tail_negligibility, log_mittag_leffler,
                             log_upper_gamma_q, mittag_leffler_rate, moment_base_from_M,
                             predict_logEu_rate, predict_logEup_rate, predict_moment_prefactor,
                             predict_moment_prefactor_M, small_n_consistency)
from artifact.errors import HypothesisViolated
from artifact.kernels import DiracSpace, RieszRadial


@given(theta=st.floats(0.1, 5.0), b=st.floats(0.1, 1e3))
@settings(max_examples=40, deadline=None)
def test_exponential_series(theta, b):
    assert log_mittag_leffler(theta, 1.0, b) == pytest.approx(theta * b, rel=1e-13)


@pytest.mark.parametrize("theta,b", [(1.0, 1e3), (3.0, 1e3), (0.5, 20.0)])
def test_squared_factorial_series_is_bessel(theta, b):
    ref = float(mpmath.log(mpmath.besseli(0, 2 * mpmath.sqrt(theta * b))))
    assert log_mittag_leffler(theta, 2.0, b) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("theta,gamma,b", [(0.7, 1.5, 3.0), (2.0, 0.5, 1.0), (1.0, 3.0, 50.0)])
def test_series_against_direct_sum(theta, gamma, b):
    ref = mpmath.nsum(lambda n: (theta * b) ** n / mpmath.factorial(n) ** gamma, [0, mpmath.inf])
    assert log_mittag_leffler(theta, gamma, b) == pytest.approx(float(mpmath.log(ref)), rel=1e-12)


def test_rate_approaches_limit_slowly_for_gamma_two():
    limit = 2.0
    rates = [r for _, r in mittag_leffler_rate(1.0, 2.0, [1e2, 1e3, 1e4, 1e5])]
    gaps = [abs(r / limit - 1) for r in rates]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-2


@pytest.mark.parametrize("a,x", [(3.0, 2.0), (10.5, 40.0), (200.0, 900.0), (50.0, 2000.0)])
def test_log_upper_gamma(a, x):
    ref = float(mpmath.log(mpmath.gammainc(a, x, mpmath.inf, regularized=True)))
    assert log_upper_gamma_q(a, x) == pytest.approx(ref, rel=1e-10)


def test_gamma_tail_against_mpmath():
    eta, n, a0, c = 0.5, 12, 0.4, 1.0
    k = (1 - a0) * n
    val = mpmath.quad(lambda t: t ** k * mpmath.exp(-c * t), [n / eta ** 2, mpmath.inf])
    ref = float((mpmath.log(val) - (1 - a0) * mpmath.loggamma(n + 1)) / n)
    assert gamma_tail_negligibility(eta, n, a0, c) == pytest.approx(ref, rel=1e-9)


def test_gamma_tail_limit():
    # Laplace at the lower endpoint: n^-1 log tail -> -c / eta^2 + (1 - a0)(1 - 2 log eta)
    eta, a0, c = 0.3, 0.5, 1.0
    limit = -c / eta ** 2 + (1 - a0) * (1 - 2 * math.log(eta))
    gaps = [abs(gamma_tail_negligibility(eta, n, a0, c) - limit) for n in (5, 80, 1280, 5120)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3
    assert limit < 0


def test_hypotheses():
    with pytest.raises(HypothesisViolated):
        RateInputs(1.5, 0.6, 1.0)
    with pytest.raises(HypothesisViolated):
        RateInputs(2.0, 0.3, 1.0, d=2)
    with pytest.raises(HypothesisViolated):
        RateInputs(0.5, 1.0, 1.0)
    RateInputs(1.0, 0.5, 1.0, d=1)


def test_rate_record():
    r = RateInputs(1.0, 0.5, 0.63)
    out = predict_logEu_rate(r)
    assert out["exponent"] == pytest.approx(1.25)
    p2 = predict_logEup_rate(2, r)
    assert p2["conjecture"] is True
    assert p2["constant"] == pytest.approx(2 ** 1.5 * out["constant"], rel=1e-14)
    assert predict_logEu_rate(RateInputs(1.0, 0.5, 0.0))["constant"] == 0.0


@given(M=st.floats(0.01, 5.0), alpha=st.floats(0.05, 1.0), a0=st.floats(0.05, 0.95), n=st.integers(0, 6))
@settings(max_examples=60, deadline=None)
def test_prefactor_routes_agree(M, alpha, a0, n):
    if alpha + a0 >= 2:
        return
    r = RateInputs(alpha, a0, M)
    assert predict_moment_prefactor(n, r) == pytest.approx(predict_moment_prefactor_M(n, r), rel=1e-12)
    assert predict_moment_prefactor_M(1, r) == pytest.approx(moment_base_from_M(r), rel=1e-14)


def test_prefactor_at_zero_order():
    assert predict_moment_prefactor(0, RateInputs(1.0, 0.5, 0.7)) == 1.0


def test_small_n_exponent():
    for m, alpha in ((DiracSpace(), 1.0), (RieszRadial(0.5), 0.5)):
        out = small_n_consistency(m, 0.4, M_val=0.6)
        assert out["exponent_fit"] == pytest.approx(4 - alpha - 0.4, abs=1e-8)
        assert out["prefactor_comparison"] == "informational"
