"""Expectations of Stratonovich chaos terms E S_2n(g_2n(., t, 0)) and the
square moment E[S_n]^2, by a spectral reduction, by x-space quadrature and by
Monte Carlo over the time simplex."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import BudgetExceeded, ConfigError, Divergent
from .kernels import (DiracSpace, FiniteAtomic, RieszRadial, SpectralMeasure, TimeKernel,
                      TruncatedRadial, check_condition, gamma_eval, radial_integral,
                      sphere_area, time_kernel_closed)
from .wick import enumerate_pairings

GL_NODES = 24
TAIL_CUT = 2000.0
MC_BATCH = 1 << 15


# ---------------------------------------------------------------------------
# sine integrals  S(a, p) = int_0^a sin(u) u^(-p) du
# ---------------------------------------------------------------------------


_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


def _gl_map(a, b):
    """Nodes and weights of the Gauss-Legendre rule on [a, b] (broadcast)."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (_GL_X + 1.0), half * _GL_W


class SineTables:
    """Cumulative half-period sums of sin(u) u^(-p) for p = a0, a0 - 1, a0 - 2."""

    def __init__(self, alpha0: float, periods: int = 64):
        if not 0.0 <= alpha0 < 1.0:
            raise ValueError("alpha0 must lie in [0, 1)")
        self.alpha0 = alpha0
        self.powers = np.array([alpha0, alpha0 - 1.0, alpha0 - 2.0])
        self._jacobi = [(*special.roots_jacobi(GL_NODES, 0.0, -p), p) for p in self.powers]
        self.cum = np.zeros((3, 1))
        self._extend(periods)

    def _first_panel(self, b):
        # Gauss-Jacobi with the exact weight u^(-p) on [0, b]
        b = np.asarray(b, dtype=float)[..., None]
        rows = []
        for x, w, p in self._jacobi:
            u = 0.5 * b * (x + 1.0)
            rows.append(np.sum(w * np.sin(u), axis=-1) * (0.5 * b[..., 0]) ** (1.0 - p))
        return np.stack(rows)

    def _panel(self, a, b):
        u, w = _gl_map(a, b)
        s = np.sin(u) * w
        return np.stack([np.sum(s * u ** (-p), axis=-1) for p in self.powers])

    def _extend(self, periods: int):
        have = self.cum.shape[1] - 1
        if periods <= have:
            return
        k = np.arange(max(have, 1), periods)
        pieces = [self._first_panel(math.pi)] if have == 0 else []
        first = np.stack(pieces, axis=1) if pieces else np.zeros((3, 0))
        rest = self._panel(k * math.pi, (k + 1) * math.pi)
        inc = np.concatenate([first.reshape(3, -1), rest.reshape(3, -1)], axis=1)
        self.cum = np.concatenate([self.cum, self.cum[:, -1:] + np.cumsum(inc, axis=1)], axis=1)

    def integrals(self, a):
        """S(a, p) for the three powers; shape (3,) + a.shape."""
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("upper limit must be nonnegative")
        k = np.floor(a / math.pi).astype(int)
        self._extend(int(k.max(initial=0)) + 2)
        out = self.cum[:, k].copy()
        head = k == 0
        if np.any(head):
            out[:, head] = self._first_panel(a[head])
        if np.any(~head):
            out[:, ~head] += self._panel(k[~head] * math.pi, a[~head])
        return out

    def h(self, A):
        """H(A) = int_0^A (A - a) S(a, a0) da = 1/2 int_0^A sin(u) u^(-a0) (A - u)^2 du."""
        A = np.asarray(A, dtype=float)
        s0, s1, s2 = self.integrals(A)
        return 0.5 * (A * A * s0 - 2.0 * A * s1 + s2)


@lru_cache(maxsize=32)
def sine_tables(alpha0: float) -> SineTables:
    return SineTables(alpha0)


def sine_integral(a: float, alpha0: float) -> float:
    """int_0^a sin(u) u^(-alpha0) du by half-period summation."""
    if not a > 0:
        raise ValueError("a must be positive")
    return float(sine_tables(float(alpha0)).integrals(np.asarray(a))[0])


# ---------------------------------------------------------------------------
# reduced (spectral) route for E S_2
# ---------------------------------------------------------------------------


def _h_small(alpha0: float) -> float:
    """lim_{A->0} H(A) / A^(4 - a0)."""
    a0 = alpha0
    return 1.0 / ((2.0 - a0) * (3.0 - a0) * (4.0 - a0))


def s2_profile(t: float, rho, alpha0: float):
    """rho^(a0-4) H(t rho): the contribution of frequency |xi| = rho."""
    rho = np.asarray(rho, dtype=float)
    tab = sine_tables(float(alpha0))
    small = t * rho < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        val = rho ** (alpha0 - 4.0) * tab.h(t * rho)
    out = np.where(small, t ** (4.0 - alpha0) * _h_small(alpha0), val)
    return float(out) if out.ndim == 0 else out


def _homogeneous_integral(alpha: float, alpha0: float, cut: float = TAIL_CUT) -> float:
    """int_0^inf A^(alpha + a0 - 5) H(A) dA."""
    a0 = alpha0
    tab = sine_tables(float(a0))
    # [0, 1]: Gauss-Jacobi with weight A^(alpha - 1) on H(A)/A^(4 - a0)
    x, w = special.roots_jacobi(40, 0.0, alpha - 1.0)
    A = 0.5 * (x + 1.0)
    head = np.sum(w * 0.5 ** alpha * tab.h(A) / A ** (4.0 - a0))
    # [1, cut]: Gauss-Legendre on half-period panels
    edges = np.concatenate([[1.0], np.arange(math.pi, cut, math.pi), [cut]])
    u, wu = _gl_map(edges[:-1], edges[1:])
    body = np.sum(wu * u ** (alpha + a0 - 5.0) * tab.h(u))
    # tail from H(A) ~ C A^2 / 2 - C' A + C''/2 plus oscillating terms
    c_inf = math.gamma(1.0 - a0) * math.cos(math.pi * a0 / 2)
    c_one = math.gamma(2.0 - a0) * math.sin(math.pi * a0 / 2)
    c_two = -math.gamma(3.0 - a0) * math.cos(math.pi * a0 / 2)
    s = alpha + a0
    tail = (0.5 * c_inf * cut ** (s - 2.0) / (2.0 - s) - c_one * cut ** (s - 3.0) / (3.0 - s)
            + 0.5 * c_two * cut ** (s - 4.0) / (4.0 - s))
    return float(head + body + tail)


def s2_expectation_reduced(t: float, m: SpectralMeasure, alpha0: float) -> float:
    """E S_2(g_2(., t, 0)) = int mu(d xi) |xi|^(a0-4) H(t |xi|)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if not check_condition(m, alpha0, "stratonovich").finite:
        raise Divergent("the Stratonovich integrability condition fails")
    if isinstance(m, FiniteAtomic):
        return float(np.sum(m.weights * s2_profile(t, m.radii, alpha0)))
    if isinstance(m, (RieszRadial, DiracSpace)):
        alpha = m.homogeneity
        return m.radial_coef * t ** (4.0 - alpha - alpha0) * _homogeneous_integral(alpha, alpha0)
    breaks = [k * math.pi / t for k in range(1, int(m.cutoff * t / math.pi) + 1)]
    return radial_integral(m, lambda r: s2_profile(t, r, alpha0), breakpoints=breaks)


# ---------------------------------------------------------------------------
# x-space primitives of gamma in d = 1
# ---------------------------------------------------------------------------


class _Primitives:
    """K(u) = int_{-u}^u gamma(y)/2 dy = int G(u, y) gamma(y) dy and
    Psi(z) = int_0^|z| (|z| - y) gamma(y) dy, written as K(u) = u^a * k_hat(u)."""

    def __init__(self, m: SpectralMeasure, zmax: float):
        self.m = m
        self.power = 0.0
        if isinstance(m, RieszRadial):
            self.power = 1.0 - m.alpha
        elif isinstance(m, TruncatedRadial):
            # gamma is entire here; a Chebyshev fit of its x-space values suffices
            deg = 96
            nodes = np.cos(math.pi * (np.arange(deg + 1) + 0.5) / (deg + 1)) * 0.5 * zmax + 0.5 * zmax
            vals = np.array([gamma_eval(m, z) for z in nodes])
            cheb = np.polynomial.Chebyshev.fit(nodes, vals, deg, domain=[0.0, zmax])
            self._g1 = cheb.integ(lbnd=0.0)
            self._g2 = self._g1.integ(lbnd=0.0)

    def k_hat(self, u: float) -> float:
        m = self.m
        if isinstance(m, DiracSpace):
            return 0.5
        if isinstance(m, RieszRadial):
            return m.c_prime / (1.0 - m.alpha)
        if isinstance(m, FiniteAtomic):
            xi, w = m.frequencies[:, 0], m.weights
            return float(np.sum(w * u * np.sinc(xi * u / math.pi)))
        return float(self._g1(u))

    def psi(self, z: float) -> float:
        m, z = self.m, abs(z)
        if isinstance(m, RieszRadial):
            a = m.alpha
            return m.c_prime * z ** (2.0 - a) / ((1.0 - a) * (2.0 - a))
        if isinstance(m, FiniteAtomic):
            xi, w = m.frequencies[:, 0], m.weights
            return float(np.sum(w * 0.5 * z * z * np.sinc(xi * z / (2 * math.pi)) ** 2))
        return float(self._g2(z))

    def box(self, a: float, b: float) -> float:
        """int int G(a, x) G(b, y) gamma(x - y) dx dy."""
        if isinstance(self.m, DiracSpace):
            return 0.5 * min(a, b)
        return 0.5 * (self.psi(a + b) - self.psi(a - b))


def _require_d1(m):
    if getattr(m, "d", 1) != 1:
        raise ConfigError("x-space quadrature is limited to d = 1")


# ---------------------------------------------------------------------------
# general chaos moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSpec:
    n: int
    t: float
    measure: object
    alpha0: float
    method: str = "quadrature"
    budget: int = 200_000
    seed: int = 0
    eps: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not self.t > 0:
            raise ConfigError("t must be positive")
        if self.method not in ("quadrature", "monte_carlo"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method == "quadrature" and (self.n > 2 or self.d != 1):
            raise ConfigError("quadrature is limited to n <= 2 and d = 1")
        if self.method == "monte_carlo":
            if isinstance(self.measure, (DiracSpace, RieszRadial)) and not self.eps > 0:
                raise ConfigError("Monte Carlo needs eps > 0 for an infinite spectral measure")

    @property
    def d(self) -> int:
        return getattr(self.measure, "d", 1)


class Estimate(NamedTuple):
    value: float
    error_estimate: float


def _direct_quadrature_n1(spec: MomentSpec) -> Estimate:
    """int_0^t s ds int_0^(t-s) u^(-a0) K(u) du with K(u) = int G(u,y) gamma(y) dy."""
    t, a0, m = spec.t, spec.alpha0, spec.measure
    prim = _Primitives(m, 2.0 * t)
    a = prim.power
    errs = []

    def j_hat(v):
        # J(v) / v^(1 - a0 + a) = int_0^1 w^(a - a0) k_hat(v w) dw
        if v == 0.0:
            return prim.k_hat(0.0) / (1.0 + a - a0)
        val, err = integrate.quad(lambda w: prim.k_hat(v * w), 0.0, 1.0, weight="alg",
                                  wvar=(a - a0, 0.0), epsabs=1e-13, epsrel=1e-11, limit=200)
        errs.append(err)
        return val

    val, err = integrate.quad(lambda s: j_hat(t - s), 0.0, t, weight="alg",
                              wvar=(1.0, 1.0 - a0 + a), epsabs=1e-13, epsrel=1e-10, limit=200)
    scale = t ** (3.0 - a0 + a)
    total_err = err + max(errs, default=0.0) * scale
    if total_err > 1e-6 * max(abs(val), 1e-300):
        raise BudgetExceeded("direct quadrature did not converge", val)
    return Estimate(val, total_err)


def s2n_expectation_direct(spec: MomentSpec) -> Estimate:
    """E S_2n(g_2n(., t, 0)) by x-space quadrature (n = 1) or simplex Monte Carlo."""
    if not check_condition(spec.measure, spec.alpha0, "stratonovich").finite:
        raise Divergent("the Stratonovich integrability condition fails")
    if spec.method == "monte_carlo":
        return s2n_expectation_mc(spec)
    if spec.n == 2:
        raise ConfigError("n = 2 is available through method='monte_carlo' only")
    _require_d1(spec.measure)
    return _direct_quadrature_n1(spec)


def chaos_expectation(order: int, spec: MomentSpec) -> Estimate:
    """E S_order(g_order); odd orders vanish."""
    if order % 2:
        return Estimate(0.0, 0.0)
    if order // 2 != spec.n:
        raise ConfigError("order must equal 2 n")
    return s2n_expectation_direct(spec)


# --- Monte Carlo ------------------------------------------------------------


def _spectral_sampler(m, eps: float):
    """(total mass, sampler(rng, size) -> frequencies of shape size + (d,))."""
    d = getattr(m, "d", 1)

    def directions(rng, shape):
        z = rng.standard_normal(shape + (d,))
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    if isinstance(m, FiniteAtomic):
        freqs, w = m.frequencies, m.weights
        p = w / w.sum()
        return w.sum(), lambda rng, shape: freqs[rng.choice(len(w), size=shape, p=p)]
    if isinstance(m, DiracSpace):
        mass = (4.0 * math.pi * eps) ** -0.5
        sd = math.sqrt(1.0 / (2.0 * eps))
        return mass, lambda rng, shape: rng.normal(0.0, sd, size=shape + (1,))
    if isinstance(m, RieszRadial):
        a = m.alpha
        mass = m.radial_coef * 0.5 * math.gamma(a / 2) * eps ** (-a / 2)
        return mass, lambda rng, shape: (
            np.sqrt(rng.gamma(a / 2, 1.0 / eps, size=shape))[..., None] * directions(rng, shape))
    # truncated radial: inverse CDF on a fine grid
    R = m.cutoff
    grid = np.linspace(0.0, R, 4097)
    dens = np.asarray(m.radial_shape(grid), dtype=float) * np.broadcast_to(grid ** m.radial_power, grid.shape)
    if eps > 0:
        dens = dens * np.exp(-eps * grid ** 2)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    mass = m.radial_coef * cdf[-1]
    cdf /= cdf[-1]
    return mass, lambda rng, shape: (
        np.interp(rng.random(shape), cdf, grid)[..., None] * directions(rng, shape))


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, batch]))


def s2n_expectation_mc(spec: MomentSpec, deltas=None) -> Estimate:
    """Uniform simplex sampling with the truncated time kernel at (delta, delta/2)
    and Richardson extrapolation in delta^(1 - a0)."""
    n, t, a0 = spec.n, spec.t, spec.alpha0
    mass, sample = _spectral_sampler(spec.measure, spec.eps)
    delta = spec.delta if spec.delta > 0 else t / 512.0
    deltas = deltas or (delta, delta / 2)
    kernels = [TimeKernel(a0, dl) for dl in deltas]
    pairings = enumerate_pairings(n)
    volume = t ** (2 * n) / math.factorial(2 * n)
    r = 2.0 ** (1.0 - a0)

    samples = []
    done, batch = 0, 0
    while done < spec.budget:
        size = min(MC_BATCH, spec.budget - done)
        rng = _batch_rng(spec.seed, batch)
        s = np.sort(rng.random((size, 2 * n)), axis=1) * t
        ds = np.diff(np.concatenate([s, np.full((size, 1), t)], axis=1), axis=1)
        xi = sample(rng, (size, n))
        acc = np.zeros((size, len(kernels)))
        for p in pairings:
            eta = np.zeros((size, 2 * n, xi.shape[-1]))
            kern = np.ones((size, len(kernels)))
            for q, (j, k) in enumerate(p.pairs):
                eta[:, j - 1:k - 1] += xi[:, q, None, :]
                u = s[:, k - 1] - s[:, j - 1]
                for c, kk in enumerate(kernels):
                    kern[:, c] *= time_kernel_closed(kk, u)
            rho = np.linalg.norm(eta, axis=-1)
            space = np.prod(ds * np.sinc(rho * ds / math.pi), axis=1)
            acc += kern * space[:, None]
        fine, coarse = acc[:, 1], acc[:, 0]
        samples.append((r * fine - coarse) / (r - 1.0))
        done += size
        batch += 1
    vals = np.concatenate(samples) * volume * mass ** n
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))))


# ---------------------------------------------------------------------------
# square moment E[S_n]^2
# ---------------------------------------------------------------------------


def l2_norm_chaos(spec: MomentSpec) -> float:
    """E[S_1(g_1(., t, 0))]^2 = 2 int_{s<r} (r - s)^(-a0) int int G(s,x)G(r,y)gamma(x-y)."""
    if spec.n != 1:
        raise ConfigError("the square moment is implemented for n = 1")
    if not check_condition(spec.measure, spec.alpha0, "stratonovich").finite:
        raise Divergent("the Stratonovich integrability condition fails")
    _require_d1(spec.measure)
    t, a0 = spec.t, spec.alpha0
    prim = _Primitives(spec.measure, 2.0 * t)

    def inner(r):
        if r == 0.0:
            return 0.0
        v, _ = integrate.quad(lambda s: prim.box(s, r), 0.0, r, weight="alg",
                              wvar=(0.0, -a0), epsabs=1e-14, epsrel=1e-11, limit=200)
        return v

    val, err = integrate.quad(inner, 0.0, t, epsabs=1e-14, epsrel=1e-10, limit=200)
    if err > 1e-6 * abs(val):
        raise BudgetExceeded("square-moment quadrature did not converge", 2.0 * val)
    return 2.0 * val


def growth_constant(value: float, n: int, t: float) -> float:
    """Smallest C with value <= C^n t^(2n) / n!."""
    return (value * math.factorial(n)) ** (1.0 / n) / t ** 2


def scaling_exponent(values, horizons) -> float:
    """log-ratio slope from two horizons."""
    (v1, v2), (t1, t2) = values, horizons
    return math.log(v2 / v1) / math.log(t2 / t1)
