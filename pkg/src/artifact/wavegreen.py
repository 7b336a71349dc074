"""Fundamental solutions of the wave equation, the heat kernel and the
Laplace subordination identity that links them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import LightConeSingularity, NonIntegrable, PointwiseUndefined, QuadratureFailure
from .kernels import _norm

TAIL_RTOL = 1e-10


@dataclass(frozen=True)
class GreenSpec:
    """Dimension and (for d = 3) the heat-smoothing time eta of the sphere measure."""

    d: int = 1
    eta: float = 0.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


def _gauss(eta, z):
    return np.exp(-z * z / (2.0 * eta)) / math.sqrt(2.0 * math.pi * eta)


def green_radial(g: GreenSpec, t: float, r):
    """G(t, x) as a function of r = |x|."""
    if not t > 0:
        raise ValueError("t must be positive")
    r = np.asarray(r, dtype=float)
    if g.d == 1:
        return np.where(r <= t, 0.5, 0.0)
    if g.d == 2:
        if np.any(r == t):
            raise LightConeSingularity("d = 2 Green function is singular on |x| = t")
        with np.errstate(invalid="ignore", divide="ignore"):
            val = 1.0 / (2.0 * math.pi * np.sqrt(np.maximum(t * t - r * r, 0.0)))
        return np.where(r < t, val, 0.0)
    if g.eta == 0:
        raise PointwiseUndefined("d = 3 Green function is a surface measure; pass eta > 0")
    eta = g.eta
    # sphere measure of radius t, divided by 4 pi t, convolved with p_3(eta, .)
    with np.errstate(invalid="ignore", divide="ignore"):
        off = (_gauss(eta, r - t) - _gauss(eta, r + t)) / (4.0 * math.pi * r)
    at0 = t * np.exp(-t * t / (2 * eta)) / (2.0 * math.pi * eta) ** 1.5
    return np.where(r > 1e-8 * max(t, math.sqrt(eta)), off, at0)


def green_eval(g: GreenSpec, t: float, x):
    """Pointwise G(t, x) for d = 1, 2 and the mollified G_eta for d = 3."""
    out = green_radial(g, t, _norm(x, g.d))
    return float(out) if np.ndim(out) == 0 else out


def green_fourier(t: float, rho):
    """Spatial Fourier transform sin(rho t)/rho (limit t at rho = 0)."""
    rho = np.asarray(rho, dtype=float)
    out = t * np.sinc(rho * t / math.pi)
    return float(out) if out.ndim == 0 else out


def heat_kernel(d: int, t: float, x):
    """Brownian transition density (2 pi t)^(-d/2) exp(-|x|^2 / 2t)."""
    if not t > 0:
        raise ValueError("t must be positive")
    r = _norm(x, d)
    out = (2.0 * math.pi * t) ** (-d / 2) * np.exp(-r * r / (2.0 * t))
    return float(out) if np.ndim(out) == 0 else out


def green_mass(g: GreenSpec, t: float) -> float:
    """Integral of G(t, .) over R^d by radial quadrature."""
    if g.d == 1:
        v, _ = integrate.quad(lambda x: green_eval(g, t, x), -t, t, epsabs=1e-14, epsrel=1e-13)
        return v
    if g.d == 2:
        # r = t sin(phi) removes the light-cone singularity
        f = lambda phi: (2 * math.pi * t * math.sin(phi) * t * math.cos(phi)
                         / (2 * math.pi * t * math.cos(phi)) if phi < math.pi / 2 else t)
        v, _ = integrate.quad(f, 0.0, math.pi / 2, epsabs=1e-14, epsrel=1e-13)
        return v
    s = math.sqrt(g.eta)
    upper = t + 40 * s
    f = lambda r: 4 * math.pi * r * r * float(green_radial(g, t, r))
    v, _ = integrate.quad(f, 0.0, upper, points=[max(t - 10 * s, 0.0), t, t + 10 * s],
                          epsabs=1e-13, epsrel=1e-11, limit=400)
    return v


def green_scaling_check(g: GreenSpec, t: float, x, rtol: float = 1e-12) -> bool:
    """G(t, x) = t^(-(d-1)) G(1, x/t) for d = 1, 2."""
    if g.d not in (1, 2):
        raise ValueError("scaling check is stated for d = 1, 2")
    x = np.asarray(x, dtype=float)
    lhs = green_eval(g, t, x)
    rhs = t ** (-(g.d - 1)) * green_eval(g, 1.0, x / t)
    return bool(np.allclose(lhs, rhs, rtol=rtol, atol=0.0))


class Subordination(NamedTuple):
    lhs: float
    rhs: float


def _laplace_truncation(lam_rate: float, start: float) -> float:
    return start + (math.log(1.0 / TAIL_RTOL) + 5.0) / lam_rate


def subordination_check(lam: float, x, d: int) -> Subordination:
    """Both sides of int e^(-lam t) G(t,x) dt = 1/2 int e^(-lam^2 t/2) p(t,x) dt."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    if d not in (1, 2):
        raise ValueError("pointwise subordination is available for d = 1, 2")
    g = GreenSpec(d=d)
    r = float(_norm(x, d))
    if d == 2 and r == 0:
        raise NonIntegrable("both sides diverge logarithmically at x = 0 in d = 2")

    # wave side: G vanishes for t < r
    T = _laplace_truncation(lam, r)
    if d == 1:
        lhs, err = integrate.quad(lambda t: math.exp(-lam * t) * 0.5, r, T,
                                  epsabs=1e-15, epsrel=1e-12)
    else:
        # t = r cosh(w) removes the light-cone singularity
        W = math.acosh(T / r)
        lhs, err = integrate.quad(lambda w: math.exp(-lam * r * math.cosh(w)) / (2 * math.pi),
                                  0.0, W, epsabs=1e-15, epsrel=1e-12, limit=200)
    if err > 1e-8:
        raise QuadratureFailure("wave-side quadrature", err)

    # heat side
    T2 = _laplace_truncation(lam * lam / 2, 0.0)
    f = lambda t: 0.5 * math.exp(-lam * lam * t / 2) * heat_kernel(d, t, x) if t > 0 else 0.0
    if d == 1 and r == 0:
        # t = s^2 removes the t^(-1/2) endpoint singularity
        rhs, err = integrate.quad(lambda s: 2 * s * f(s * s), 0.0, math.sqrt(T2),
                                  epsabs=1e-15, epsrel=1e-12, limit=200)
    else:
        peak = r * r / d
        rhs, err = integrate.quad(f, 0.0, T2, points=[peak] if 0 < peak < T2 else None,
                                  epsabs=1e-15, epsrel=1e-12, limit=200)
    if err > 1e-8:
        raise QuadratureFailure("heat-side quadrature", err)
    return Subordination(lhs, rhs)


def fourier_of_green_1d(t: float, xi: float) -> float:
    """Quadrature of int G(t,x) e^(i xi x) dx in d = 1 (real by symmetry)."""
    v, _ = integrate.quad(lambda x: 0.5 * math.cos(xi * x), -t, t, epsabs=1e-14, epsrel=1e-12)
    return v
