import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.errors import BudgetExceeded, ConfigError, ExpOverflow
from artifact.kernels import DiracSpace, FiniteAtomic, RieszRadial, cosine_atoms, gamma_mollified
from artifact.localtime import (cauchy_characteristic_check, ensemble_mean, exp_moment_trend,
                                hamiltonian_beta_only, hamiltonian_complex, hamiltonian_plain,
                                hamiltonian_time_frac, hamiltonian_time_only, jackknife,
                                kernel_chain_failures, mutual_hamiltonian, random_kernel_samples,
                                representation_check_n1, representation_lhs, simulate_paths)
from artifact.strat_bound import lemma_a1

EPS = 0.01
DELTA = DiracSpace()
ONE = FiniteAtomic(atoms=(((0.0,), 1.0),), d=1)


@pytest.fixture(scope="module")
def paths():
    return simulate_paths(1, 1.0, 32, 400, 5)


def test_paths_start_at_zero_and_repeat():
    p = simulate_paths(2, 1.0, 16, 50, 3, with_cauchy=True)
    assert p.B.shape == (50, 33, 2) and p.beta.shape == (50, 33) and p.kappa.shape == (50, 33)
    assert np.all(p.B[:, 0] == 0) and np.all(p.beta[:, 0] == 0) and np.all(p.kappa[:, 0] == 0)
    q = simulate_paths(2, 1.0, 16, 50, 3, with_cauchy=True)
    assert np.array_equal(p.B, q.B) and np.array_equal(p.kappa, q.kappa)
    assert not np.array_equal(p.B, simulate_paths(2, 1.0, 16, 50, 4).B)


def test_terminal_variance():
    p = simulate_paths(1, 1.0, 2, 100_000, 17)
    assert np.var(p.B_nodes[:, -1, 0], ddof=1) == pytest.approx(1.0, abs=0.02)
    inc = np.diff(p.B_nodes[:, :, 0], axis=1)
    assert np.var(inc, ddof=1) == pytest.approx(p.h, rel=5 / math.sqrt(p.m))


def test_constant_kernel_gives_t_squared(paths):
    np.testing.assert_allclose(hamiltonian_plain(paths, ONE, 0.0), 1.0, rtol=1e-13)


def test_frozen_path(paths):
    frozen = dataclasses.replace(paths.subset([0]), B=np.zeros_like(paths.B[:1]))
    val = hamiltonian_plain(frozen, DELTA, EPS)
    assert val[0] == pytest.approx(gamma_mollified(DELTA, EPS, 0.0), rel=1e-13)


def test_plain_nonnegative(paths):
    assert np.all(hamiltonian_plain(paths, DELTA, EPS) >= 0)


def test_mutual_local_time_cauchy_schwarz():
    p = simulate_paths(1, 1.0, 32, 200, 1)
    q = simulate_paths(1, 1.0, 32, 200, 2)
    for m in (DELTA, RieszRadial(0.5)):
        cross = mutual_hamiltonian(p, q, m, EPS)
        assert np.all(cross ** 2 <= hamiltonian_plain(p, m, EPS) * hamiltonian_plain(q, m, EPS) * (1 + 1e-12))


def test_complex_without_beta_is_real_kernel(paths):
    flat = dataclasses.replace(paths, beta=np.zeros_like(paths.beta))
    val = hamiltonian_complex(flat, 2.0, 0.4, DELTA, EPS)
    np.testing.assert_allclose(val.imag, 0.0, atol=1e-14)
    np.testing.assert_allclose(val.real, 2.0 ** -0.4 * hamiltonian_time_only(flat, 0.4, DELTA, EPS),
                               rtol=1e-12)


def test_complex_modulus_bound(paths):
    val = hamiltonian_complex(paths, 1.5, 0.5, DELTA, EPS)
    bound = 1.5 ** -0.5 * hamiltonian_time_only(paths, 0.5, DELTA, EPS)
    assert np.all(np.abs(val) <= bound * (1 + 1e-12))


@pytest.mark.parametrize("theta,a0", [(1.0, 0.3), (2.0, 0.5)])
def test_complex_mean_positivity(paths, theta, a0):
    est = ensemble_mean(hamiltonian_complex(paths, theta, a0, cosine_atoms(1.0)), paths, "complex")
    assert est.value.real >= -3 * est.stderr
    assert abs(est.value.imag) <= 3 * est.stderr
    assert est.stderr >= 0


def test_time_frac_dominations(paths):
    tf = hamiltonian_time_frac(paths, 2.0, 0.7, 0.5, DELTA, EPS)
    assert np.all(tf >= 0)
    assert np.all(tf <= 2.0 ** -0.5 * hamiltonian_time_only(paths, 0.5, DELTA, EPS) * (1 + 1e-12))
    assert np.all(tf <= 0.7 ** -0.5 * hamiltonian_beta_only(paths, 0.5, DELTA, EPS) * (1 + 1e-12))


def test_time_frac_zero_eta_limit(paths):
    ref = 2.0 ** -0.5 * hamiltonian_time_only(paths, 0.5, DELTA, EPS)
    np.testing.assert_allclose(hamiltonian_time_frac(paths, 2.0, 0.0, 0.5, DELTA, EPS), ref, rtol=1e-13)
    np.testing.assert_allclose(hamiltonian_time_frac(paths, 2.0, 1e-9, 0.5, DELTA, EPS), ref, rtol=1e-6)


def test_kernel_chain():
    r = kernel_chain_failures(random_kernel_samples(200_000, 4), 2.0, 0.5, eta=0.8)
    assert r.ok and r.failures == 0 and r.n == 200_000


@given(s=st.floats(0, 1), r=st.floats(0, 1), theta=st.floats(0.1, 5), a0=st.floats(0.05, 0.95),
       c=st.floats(1.0, 10.0), db=st.floats(-3, 3))
@settings(max_examples=100, deadline=None)
def test_kernel_modulus_scaling(s, r, theta, a0, c, db):
    if s == r:
        return
    k = lambda th: math.hypot(th * (s - r), db) ** -a0
    ratio = k(c * theta) / k(theta)
    assert c ** -a0 * (1 - 1e-12) <= ratio <= 1 + 1e-12
    flat = kernel_chain_failures(([s], [r], [0.0], [1.0]), theta, a0)
    assert flat.ok


def test_zero_beta_increment_makes_chain_tight():
    s, r = np.array([0.2]), np.array([0.7])
    u = 2.0 * 0.5
    assert kernel_chain_failures((s, r, np.zeros(1), np.ones(1)), 2.0, 0.5).ok
    assert complex(u ** -0.5) == pytest.approx(abs(u) ** -0.5)


def test_cauchy_characteristic():
    p = simulate_paths(1, 1.0, 16, 20_000, 8, with_cauchy=True)
    for lag, mean, err, exact in cauchy_characteristic_check(p, 1.0, 1.5, [1, 8, 32]):
        assert abs(mean - exact) <= 4 * err + 1e-12


def test_scaling_in_distribution_riesz():
    # B(c s) = sqrt(c) B(s) in law, and gamma_eps(sqrt(c) x) = c^(-a/2) gamma_(eps/c)(x)
    alpha, c = 0.5, 2.0
    m = RieszRadial(alpha)
    h1 = hamiltonian_plain(simulate_paths(1, 1.0, 32, 3000, 21), m, EPS)
    h2 = hamiltonian_plain(simulate_paths(1, c, 32, 3000, 22), m, EPS * c)
    f = c ** ((4 - alpha) / 2)
    for k in (1, 2):
        a, b = f ** k * h1 ** k, h2 ** k
        err = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
        assert abs(a.mean() - b.mean()) <= 4 * err


def test_representation_lhs_matches_single_integral():
    # Laplace transform of E S_2 is theta^-3 times the single spectral integral
    m = cosine_atoms(1.0)
    for theta in (1.0, 2.0, 4.0):
        lhs, err = representation_lhs(theta, m, 0.5)
        assert lhs == pytest.approx(theta ** -3 * lemma_a1(theta, m, 0.5), rel=1e-8)


def test_representation_small_run():
    r = representation_check_n1(2.0, cosine_atoms(1.0), 0.5, 3000, 7, K=256)
    assert r.lhs > 0 and r.stderr > 0
    assert abs(r.lhs - r.rhs) <= 3 * r.stderr + r.quad_tol


def test_representation_decreases_in_theta():
    vals = [representation_lhs(t, cosine_atoms(1.0), 0.5)[0] for t in (1.0, 2.0, 4.0, 8.0)]
    assert all(np.diff(vals) < 0) and vals[-1] > 0


def test_representation_guards():
    with pytest.raises(ConfigError):
        representation_check_n1(2.0, DELTA, 0.5, 10, 1)
    with pytest.raises(BudgetExceeded):
        representation_check_n1(2.0, cosine_atoms(1.0), 0.5, 10 ** 9, 1)


def test_exp_moment_trend_properties():
    p = [simulate_paths(1, t, 16, 300, 30 + i) for i, t in enumerate((1.0, 2.0))]
    zero = exp_moment_trend(0.0, 1.0, 1.0, 0.5, DELTA, [1.0, 2.0], 300, 0, paths=p)
    assert [v for _, v, _ in zero] == [0.0, 0.0]
    lo = exp_moment_trend(0.05, 1.0, 1.0, 0.5, DELTA, [1.0, 2.0], 300, 0, eps=EPS, paths=p)
    hi = exp_moment_trend(0.1, 1.0, 1.0, 0.5, DELTA, [1.0, 2.0], 300, 0, eps=EPS, paths=p)
    damped = exp_moment_trend(0.1, 2.0, 1.0, 0.5, DELTA, [1.0, 2.0], 300, 0, eps=EPS, paths=p)
    for a, b, c in zip(lo, hi, damped):
        assert a[1] <= b[1] and c[1] <= b[1] and b[2] >= 0
    with pytest.raises(ExpOverflow):
        exp_moment_trend(1e6, 1.0, 1.0, 0.5, DELTA, [1.0], 300, 0, eps=EPS, paths=p)


def test_jackknife_matches_iid_stderr():
    x = np.random.default_rng(0).standard_normal(32_000)
    mean, err = jackknife(x)
    assert mean == pytest.approx(x.mean())
    assert err == pytest.approx(x.std(ddof=1) / math.sqrt(len(x)), rel=0.3)
