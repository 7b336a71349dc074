"""Brownian path ensembles and grid estimators of intersection-local-time
Hamiltonians with real, complex and time-fractional kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numba
import numpy as np
from scipy import integrate, interpolate, special

from .errors import BudgetExceeded, ConfigError, ExpOverflow
from .kernels import (DiracSpace, FiniteAtomic, RieszRadial, TruncatedRadial,
                      gamma_eval, gamma_mollified)
from .moments import s2_expectation_reduced

PATH_BATCH = 1024
EXP_CAP = 700.0
JACKKNIFE_BATCHES = 32
MAX_PAIR_EVALS = 2e10
TAIL_LOG = 18.0


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, batch]))


# ---------------------------------------------------------------------------
# path ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathEnsemble:
    """m paths on the half-step grid j t / (2K), j = 0..2K.

    Even indices are the K + 1 cell boundaries, odd indices the K cell midpoints.
    """

    t: float
    K: int
    m: int
    d: int
    seed: int
    B: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    kappa: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.t / self.K

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.K + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.h * (np.arange(self.K) + 0.5)

    @property
    def B_nodes(self) -> np.ndarray:
        return self.B[:, ::2]

    @property
    def B_mid(self) -> np.ndarray:
        return self.B[:, 1::2]

    @property
    def beta_nodes(self) -> np.ndarray:
        return self.beta[:, ::2]

    @property
    def beta_mid(self) -> np.ndarray:
        return self.beta[:, 1::2]

    def subset(self, idx) -> "PathEnsemble":
        idx = np.atleast_1d(idx)
        return PathEnsemble(self.t, self.K, len(idx), self.d, self.seed, self.B[idx],
                            self.beta[idx], None if self.kappa is None else self.kappa[idx])


def _walk(increments: np.ndarray) -> np.ndarray:
    shape = increments.shape[:1] + (1,) + increments.shape[2:]
    return np.concatenate([np.zeros(shape), np.cumsum(increments, axis=1)], axis=1)


def simulate_paths(d: int, t: float, K: int, m: int, seed: int,
                   with_cauchy: bool = False) -> PathEnsemble:
    """Brownian B in R^d, scalar Brownian beta and optionally a standard Cauchy
    process kappa, all on the half-step grid. Batches are seeded by (seed, batch)."""
    if K < 2 or m < 1:
        raise ValueError("need K >= 2 and m >= 1")
    if not t > 0:
        raise ValueError("t must be positive")
    step = t / (2 * K)
    Bs, bs, ks = [], [], []
    for batch, start in enumerate(range(0, m, PATH_BATCH)):
        size = min(PATH_BATCH, m - start)
        rng = _batch_rng(seed, batch)
        Bs.append(_walk(rng.standard_normal((size, 2 * K, d)) * math.sqrt(step)))
        bs.append(_walk(rng.standard_normal((size, 2 * K)) * math.sqrt(step)))
        if with_cauchy:
            ks.append(_walk(rng.standard_cauchy((size, 2 * K)) * step))
    kappa = np.concatenate(ks) if with_cauchy else None
    return PathEnsemble(t, K, m, d, seed, np.concatenate(Bs), np.concatenate(bs), kappa)


class HamiltonianEstimate(NamedTuple):
    value: complex
    stderr: float
    m: int
    K: int
    kernel: str


def jackknife(values, stat=np.mean, n_batches: int = JACKKNIFE_BATCHES):
    """Statistic of the full sample and its batch-means jackknife stderr."""
    values = np.asarray(values)
    full = stat(values)
    nb = min(n_batches, len(values))
    if nb < 2:
        return full, float("nan")
    groups = np.array_split(values, nb)
    loo = np.array([stat(np.concatenate(groups[:i] + groups[i + 1:])) for i in range(nb)])
    centre = loo.mean(axis=0)
    var = (nb - 1) / nb * np.sum(np.abs(loo - centre) ** 2, axis=0)
    return full, np.sqrt(var)


def ensemble_mean(values, p: PathEnsemble, kernel: str) -> HamiltonianEstimate:
    """Mean of per-path values with a jackknife stderr on the modulus of the deviation."""
    mean, err = jackknife(np.asarray(values))
    return HamiltonianEstimate(mean, float(err), p.m, p.K, kernel)


# ---------------------------------------------------------------------------
# covariance evaluation on path differences
# ---------------------------------------------------------------------------


def _truncated_table(m: TruncatedRadial, eps: float, rmax: float, n: int = 513):
    r = np.linspace(0.0, rmax, n)
    if eps > 0:
        vals = np.asarray(gamma_mollified(m, eps, r[:, None] if m.d == 1 else
                                          np.stack([r] + [0 * r] * (m.d - 1), axis=-1)))
    else:
        vals = np.asarray(gamma_eval(m, r[:, None] if m.d == 1 else
                                     np.stack([r] + [0 * r] * (m.d - 1), axis=-1)))
    return interpolate.CubicSpline(r, vals)


def covariance_fn(m, eps: float, rmax: float = 0.0):
    """gamma_eps (gamma when eps = 0) as a vectorised function of (..., d) differences."""
    if isinstance(m, DiracSpace) and not eps > 0:
        raise ConfigError("the delta covariance needs a mollifier eps > 0")
    if isinstance(m, RieszRadial) and not eps > 0:
        raise ConfigError("the Riesz covariance is infinite on the diagonal; pass eps > 0")
    if isinstance(m, TruncatedRadial):
        table = _truncated_table(m, eps, max(rmax, 1e-12))
        return lambda x: table(np.sqrt(np.sum(x * x, axis=-1)))
    if eps > 0:
        return lambda x: np.asarray(gamma_mollified(m, eps, x), dtype=float)
    return lambda x: np.asarray(gamma_eval(m, x), dtype=float)


def _chunks(m: int, K: int, target: int = 1 << 21):
    size = max(1, target // max(1, K * K))
    for start in range(0, m, size):
        yield slice(start, min(m, start + size))


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def hamiltonian_plain(p: PathEnsemble, m, eps: float) -> np.ndarray:
    """Per-path trapezoid product rule for int int gamma_eps(B(s) - B(r)) ds dr."""
    B = p.B_nodes
    w = np.full(p.K + 1, p.h)
    w[0] = w[-1] = 0.5 * p.h
    rmax = 2 * float(np.max(np.abs(B))) * math.sqrt(p.d) if isinstance(m, TruncatedRadial) else 0.0
    gam = covariance_fn(m, eps, rmax)
    out = np.empty(p.m)
    for sl in _chunks(p.m, p.K + 1):
        diff = B[sl, :, None, :] - B[sl, None, :, :]
        out[sl] = np.einsum("pij,i,j->p", gam(diff), w, w)
    return out


def mutual_hamiltonian(p: PathEnsemble, q: PathEnsemble, m, eps: float) -> np.ndarray:
    """Per-pair trapezoid rule for int int gamma_eps(B_p(s) - B_q(r)) ds dr."""
    if (p.K, p.t, p.m) != (q.K, q.t, q.m):
        raise ValueError("ensembles must share t, K and m")
    w = np.full(p.K + 1, p.h)
    w[0] = w[-1] = 0.5 * p.h
    Bp, Bq = p.B_nodes, q.B_nodes
    rmax = 2 * float(max(np.max(np.abs(Bp)), np.max(np.abs(Bq)))) * math.sqrt(p.d)
    gam = covariance_fn(m, eps, rmax if isinstance(m, TruncatedRadial) else 0.0)
    out = np.empty(p.m)
    for sl in _chunks(p.m, p.K + 1):
        diff = Bp[sl, :, None, :] - Bq[sl, None, :, :]
        out[sl] = np.einsum("pij,i,j->p", gam(diff), w, w)
    return out


def diagonal_time_band(h: float, alpha0: float) -> float:
    """int int over one h x h cell of |s - r|^(-a0)."""
    return 2.0 * h ** (2.0 - alpha0) / ((1.0 - alpha0) * (2.0 - alpha0))


def diagonal_beta_band(h: float, alpha0: float) -> float:
    """Expected int int over one h x h cell of |beta(s) - beta(r)|^(-a0)."""
    a = alpha0 / 2.0
    moment = 2.0 ** (-a) * math.gamma((1.0 - alpha0) / 2.0) / math.sqrt(math.pi)
    return moment * 2.0 * h ** (2.0 - a) / ((1.0 - a) * (2.0 - a))


def _midpoint_setup(p: PathEnsemble, m, eps: float, alpha0: float):
    if not 0 < alpha0 < 1:
        raise ValueError("alpha0 must lie in (0, 1)")
    B = p.B_mid
    rmax = 2 * float(np.max(np.abs(B))) * math.sqrt(p.d) if isinstance(m, TruncatedRadial) else 0.0
    gam = covariance_fn(m, eps, rmax)
    g0 = float(gam(np.zeros((1, p.d)))[0])
    lag = np.abs(p.midpoints[:, None] - p.midpoints[None, :])
    off = ~np.eye(p.K, dtype=bool)
    return B, gam, g0, lag, off


def _midpoint_sum(p, m, eps, alpha0, kernel, diag_value):
    B, gam, g0, lag, off = _midpoint_setup(p, m, eps, alpha0)
    beta = p.beta_mid
    vals = []
    for sl in _chunks(p.m, p.K):
        G = gam(B[sl, :, None, :] - B[sl, None, :, :])
        db = beta[sl, :, None] - beta[sl, None, :]
        kern = np.where(off, kernel(np.broadcast_to(lag, db.shape), db, off), 0.0)
        vals.append(p.h * p.h * np.sum(kern * G, axis=(1, 2)) + p.K * diag_value * g0)
    return np.concatenate(vals)


def hamiltonian_complex(p: PathEnsemble, theta: float, alpha0: float, m,
                        eps: float = 0.0) -> np.ndarray:
    """Per-path midpoint rule for int int (theta|s-r| + i(beta(s)-beta(r)))^(-a0)
    gamma(B(s) - B(r)); diagonal cells replaced by their exact time-kernel mass."""
    if not theta > 0:
        raise ValueError("theta must be positive")

    def kernel(lag, db, off):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(theta * lag + 1j * db, -alpha0)

    diag = theta ** (-alpha0) * diagonal_time_band(p.h, alpha0)
    return _midpoint_sum(p, m, eps, alpha0, kernel, diag)


def hamiltonian_time_only(p: PathEnsemble, alpha0: float, m, eps: float = 0.0) -> np.ndarray:
    """Per-path midpoint rule for int int |s - r|^(-a0) gamma(B(s) - B(r))."""

    def kernel(lag, db, off):
        with np.errstate(divide="ignore"):
            return lag ** (-alpha0)

    return _midpoint_sum(p, m, eps, alpha0, kernel, diagonal_time_band(p.h, alpha0))


def hamiltonian_beta_only(p: PathEnsemble, alpha0: float, m, eps: float = 0.0) -> np.ndarray:
    """Per-path midpoint rule for int int |beta(s) - beta(r)|^(-a0) gamma(B(s) - B(r))."""

    def kernel(lag, db, off):
        with np.errstate(divide="ignore"):
            return np.abs(db) ** (-alpha0)

    return _midpoint_sum(p, m, eps, alpha0, kernel, diagonal_beta_band(p.h, alpha0))


def hamiltonian_time_frac(p: PathEnsemble, theta: float, eta: float, alpha0: float, m,
                          eps: float = 0.0) -> np.ndarray:
    """Per-path midpoint rule for int int |theta(s-r) + i eta(beta(s)-beta(r))|^(-a0)
    gamma_eps(B(s) - B(r)). Each diagonal cell gets the smaller of its two
    one-variable compensations, which keeps both pointwise dominations exact."""
    if not (theta > 0 and eta >= 0):
        raise ValueError("need theta > 0 and eta >= 0")

    def kernel(lag, db, off):
        with np.errstate(divide="ignore"):
            return np.hypot(theta * lag, eta * db) ** (-alpha0)

    diag = theta ** (-alpha0) * diagonal_time_band(p.h, alpha0)
    if eta > 0:
        diag = min(diag, eta ** (-alpha0) * diagonal_beta_band(p.h, alpha0))
    return _midpoint_sum(p, m, eps, alpha0, kernel, diag)


def cauchy_characteristic_check(p: PathEnsemble, lam: float, theta: float, lag_steps):
    """Empirical E cos(lam theta (kappa(s+u) - kappa(s))) against exp(-lam theta u)."""
    if p.kappa is None:
        raise ConfigError("ensemble was simulated without the Cauchy process")
    rows = []
    step = p.t / (2 * p.K)
    for k in lag_steps:
        inc = p.kappa[:, k] - p.kappa[:, 0]
        vals = np.cos(lam * theta * inc)
        rows.append((k * step, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(p.m)),
                     math.exp(-lam * theta * k * step)))
    return rows


# ---------------------------------------------------------------------------
# representation at n = 1
# ---------------------------------------------------------------------------


@numba.njit(cache=True, fastmath=True)
def _rep_batch(t1, b1, f1, e1, t2, b2, f2, e2, theta, alpha0, out):
    # f holds sqrt(w) (cos, sin)(xi.B) per atom, so gamma(B_i - B_j) = f_i . f_j
    mb, K = t1.shape
    A = f1.shape[2]
    half = alpha0 == 0.5
    for p in range(mb):
        acc = 0.0
        for i in range(K):
            ti = t1[p, i]
            bi = b1[p, i]
            row = 0.0
            for j in range(i):
                u = theta * (ti - t1[p, j])
                v = bi - b1[p, j]
                mod = math.sqrt(u * u + v * v)
                if half:
                    re = math.sqrt(0.5 * (mod + u)) / mod
                else:
                    re = mod ** (-alpha0) * math.cos(alpha0 * math.atan2(v, u))
                g = 0.0
                for a in range(A):
                    g += f1[p, i, a] * f1[p, j, a]
                row += re * g
            acc += 2.0 * e1[p, i] * row
            u = theta * abs(ti - t2[p, i])
            v = bi - b2[p, i]
            mod = math.sqrt(u * u + v * v)
            if half:
                re = math.sqrt(0.5 * (mod + u)) / mod
            else:
                re = mod ** (-alpha0) * math.cos(alpha0 * math.atan2(v, u))
            g = 0.0
            for a in range(A):
                g += f1[p, i, a] * f2[p, i, a]
            acc += min(e1[p, i], e2[p, i]) * re * g
        out[p] = acc


def _merged_atoms(m: FiniteAtomic):
    # gamma is real, so xi and -xi contribute the same cosine
    merged = {}
    for xi, w in m.atoms:
        xi = np.asarray(xi)
        nz = np.flatnonzero(xi)
        key = tuple(-xi if len(nz) and xi[nz[0]] < 0 else xi)
        merged[key] = merged.get(key, 0.0) + w
    keys = sorted(merged)
    return np.array(keys, dtype=float).reshape(-1, m.d), np.array([merged[k] for k in keys])


def _features(B, freqs, weights):
    phase = B @ freqs.T
    sw = np.sqrt(weights)
    return np.concatenate([np.cos(phase) * sw, np.sin(phase) * sw], axis=-1)


def _rep_paths(rng, K, T, size, d, theta, freqs, weights, alpha0):
    # two independent uniform times per cell, merged into one increasing sequence
    h = T / K
    u = rng.random((size, K, 2))
    first = (u[:, :, 0] > u[:, :, 1])[:, :, None].astype(np.intp)
    times = (np.arange(K)[None, :, None] + np.sort(u, axis=2)) * h
    dt = np.diff(times.reshape(size, 2 * K), axis=1, prepend=0.0)
    B = np.cumsum(rng.standard_normal((size, 2 * K, d)) * np.sqrt(dt)[..., None], axis=1)
    b = np.cumsum(rng.standard_normal((size, 2 * K)) * np.sqrt(dt), axis=1)
    B = B.reshape(size, K, 2, d)
    b = b.reshape(size, K, 2)

    def pick(arr, which):
        idx = first if which == 0 else 1 - first
        if arr.ndim == 4:
            return np.take_along_axis(arr, idx[..., None], axis=2)[:, :, 0]
        return np.take_along_axis(arr, idx, axis=2)[:, :, 0]

    decay = theta * theta / 2
    out = np.empty(size)
    t1, t2 = pick(times, 0), pick(times, 1)
    _rep_batch(t1, pick(b, 0), _features(pick(B, 0), freqs, weights), np.exp(-decay * t1),
               t2, pick(b, 1), _features(pick(B, 1), freqs, weights), np.exp(-decay * t2),
               theta, alpha0, out)
    return out * h * h / (8.0 * theta)


class Representation(NamedTuple):
    lhs: float
    rhs: float
    stderr: float
    quad_tol: float


def representation_lhs(theta: float, m, alpha0: float):
    """int_0^inf e^(-theta t) E S_2(t) dt by quadrature over the reduced moment."""
    f = lambda t: math.exp(-theta * t) * s2_expectation_reduced(t, m, alpha0) if t > 0 else 0.0
    val, err = integrate.quad(f, 0.0, math.inf, epsabs=1e-13, epsrel=1e-10, limit=400)
    return val, err


def representation_check_n1(theta: float, m, alpha0: float, mc_budget: int, seed: int,
                            K: int = 512, batch: int = 500) -> Representation:
    """Both sides of the n = 1 Laplace-in-time representation.

    The rhs time integral over t is done in closed form, leaving the weight
    exp(-theta^2 max(s, r)/2) on [0, T]^2; the double integral is sampled with
    one uniform point per cell and an independent second point on the diagonal."""
    if not isinstance(m, FiniteAtomic):
        raise ConfigError("the sampled rhs is implemented for FiniteAtomic measures")
    if not (theta > 0 and 0 < alpha0 < 1):
        raise ValueError("need theta > 0 and alpha0 in (0, 1)")
    if mc_budget * K * K / 2 > MAX_PAIR_EVALS:
        raise BudgetExceeded(f"{mc_budget} paths at K = {K} exceed the pair budget", None)
    lhs, lerr = representation_lhs(theta, m, alpha0)
    T = 2.0 * TAIL_LOG / theta ** 2
    freqs, weights = _merged_atoms(m)
    samples = []
    for b, start in enumerate(range(0, mc_budget, batch)):
        size = min(batch, mc_budget - start)
        samples.append(_rep_paths(_batch_rng(seed, b), K, T, size, m.d, theta, freqs,
                                  weights, alpha0))
    vals = np.concatenate(samples)
    rhs, err = jackknife(vals)
    # truncation at T drops a relative e^(-TAIL_LOG) share of the weight
    tol = lerr + abs(lhs) * math.exp(-TAIL_LOG) * (1 + TAIL_LOG)
    return Representation(lhs, float(rhs), float(err), tol)


# ---------------------------------------------------------------------------
# pointwise kernel inequalities
# ---------------------------------------------------------------------------


class KernelChain(NamedTuple):
    ok: bool
    failures: int
    n: int


def random_kernel_samples(n: int, seed: int, t: float = 1.0):
    rng = np.random.default_rng(seed)
    s, r = rng.random(n) * t, rng.random(n) * t
    db = rng.standard_normal(n) * np.sqrt(np.abs(s - r)) * rng.choice([0.0, 1.0, 10.0], n)
    g = rng.exponential(size=n)
    return s, r, db, g


def kernel_chain_failures(samples, theta: float, alpha0: float, eta: float = 1.0,
                          slack: float = 1e-12) -> KernelChain:
    """Count samples violating 0 <= Re[z^-a0] g <= |z|^-a0 g = |theta(s-r) + i db|^-a0 g
    (z = theta|s-r| + i db) or the two one-variable dominations of the
    time-fractional kernel."""
    s, r, db, g = (np.asarray(a, dtype=float) for a in samples)
    if np.any(s == r):
        raise ValueError("samples need s != r")
    if np.any(g < 0):
        raise ValueError("gamma weights must be nonnegative")
    lag = np.abs(s - r)
    u = theta * lag
    mod = np.hypot(u, db)
    re = mod ** (-alpha0) * np.cos(alpha0 * np.arctan2(db, u)) * g
    mag = mod ** (-alpha0) * g
    signed = np.hypot(theta * (s - r), db) ** (-alpha0) * g
    tf = np.hypot(u, eta * db) ** (-alpha0)
    bad = (re < -slack) | (re > mag * (1 + slack) + slack) | (np.abs(mag - signed) > slack * mag)
    bad |= tf > theta ** (-alpha0) * lag ** (-alpha0) * (1 + slack)
    with np.errstate(divide="ignore"):
        beta_dom = eta ** (-alpha0) * np.abs(db) ** (-alpha0)
    bad |= tf > beta_dom * (1 + slack)
    return KernelChain(not bool(bad.any()), int(bad.sum()), len(s))


def kernel_chain_check(samples, theta: float, alpha0: float, eta: float = 1.0) -> bool:
    return kernel_chain_failures(samples, theta, alpha0, eta).ok


# ---------------------------------------------------------------------------
# exponential moments
# ---------------------------------------------------------------------------


def _log_mean_exp(x):
    return special.logsumexp(x) - math.log(len(x))


def exp_moment_trend(b: float, theta: float, eta: float, alpha0: float, m, horizons,
                     mc_budget: int, seed: int, K: int = 64, eps: float = 0.0,
                     paths=None):
    """(t, t^-1 log E exp(b t^(a0-1) H_t), jackknife stderr) per horizon, where H_t
    is the time-fractional Hamiltonian. Reported for trend inspection only."""
    if b < 0:
        raise ValueError("b must be nonnegative")
    rows = []
    for i, t in enumerate(horizons):
        p = paths[i] if paths is not None else simulate_paths(m.d, t, K, mc_budget, seed + i)
        if b == 0:
            rows.append((t, 0.0, 0.0))
            continue
        H = hamiltonian_time_frac(p, theta, eta, alpha0, m, eps)
        x = b * t ** (alpha0 - 1.0) * H
        if np.max(x) > EXP_CAP:
            raise ExpOverflow(f"sample exponent {np.max(x):.1f} exceeds {EXP_CAP}")
        val, err = jackknife(x, stat=_log_mean_exp)
        rows.append((t, float(val) / t, float(err) / t))
    return rows


__all__ = [
    "PathEnsemble", "simulate_paths", "HamiltonianEstimate", "ensemble_mean", "jackknife",
    "covariance_fn", "hamiltonian_plain", "mutual_hamiltonian", "hamiltonian_complex",
    "hamiltonian_time_only", "hamiltonian_beta_only", "hamiltonian_time_frac",
    "diagonal_time_band", "diagonal_beta_band", "cauchy_characteristic_check",
    "Representation", "representation_lhs", "representation_check_n1", "KernelChain",
    "random_kernel_samples", "kernel_chain_failures", "kernel_chain_check",
    "exp_moment_trend",
]
