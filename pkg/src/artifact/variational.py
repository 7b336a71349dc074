"""Discretised variational constants on a time x space grid and the algebra
relating them."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import NotNormalized, Stalled
from .kernels import (DiracSpace, FiniteAtomic, RieszRadial, TruncatedRadial, gamma_eval,
                      laplace_lambda_integral)

KINDS = ("M", "Mtilde", "E0", "Edelta", "H")
NORM_TOL = 1e-10
ARMIJO = 1e-4
STEP0 = 0.5
MAX_HALVINGS = 40
WINDOW = 20


@dataclass(frozen=True)
class GridConfig:
    """S time slices on [0, 1] and X interior points on (-L, L)."""

    S: int = 16
    X: int = 128
    L: float = 8.0
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.S < 1 or self.X < 3 or not self.L > 0:
            raise ValueError("need S >= 1, X >= 3 and L > 0")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError("boundary must be 'dirichlet' or 'periodic'")

    @property
    def h_s(self) -> float:
        return 1.0 / self.S

    @property
    def h_x(self) -> float:
        n = self.X if self.boundary == "periodic" else self.X + 1
        return 2.0 * self.L / n

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h_x * (np.arange(self.X) + (0 if self.boundary == "periodic" else 1))


@dataclass(frozen=True)
class FieldGrid:
    g: np.ndarray = field(repr=False)
    grid: GridConfig

    @property
    def S(self) -> int:
        return self.grid.S

    @property
    def X(self) -> np.ndarray:
        return self.grid.x

    @property
    def h_s(self) -> float:
        return self.grid.h_s

    @property
    def h_x(self) -> float:
        return self.grid.h_x

    def slice_norms(self) -> np.ndarray:
        return np.sum(self.g ** 2, axis=1) * self.h_x

    def checksum(self) -> str:
        return hashlib.sha256(np.round(self.g, 10).tobytes()).hexdigest()[:16]


def normalize(g: np.ndarray, grid: GridConfig) -> FieldGrid:
    g = np.atleast_2d(np.asarray(g, dtype=float))
    if g.shape != (grid.S, grid.X):
        raise ValueError(f"field shape {g.shape} does not match grid {(grid.S, grid.X)}")
    norms = np.sqrt(np.sum(g * g, axis=1) * grid.h_x)
    if np.any(norms == 0):
        raise NotNormalized("a slice is identically zero")
    return FieldGrid(g / norms[:, None], grid)


class VariationalSolution(NamedTuple):
    value: float
    field: FieldGrid
    iterations: int
    converged: bool
    functional: str
    history: tuple = ()

    def record(self) -> dict:
        g = self.field.grid
        return {"functional": self.functional, "value": self.value,
                "iterations": self.iterations, "converged": self.converged,
                "S": g.S, "X": g.X, "L": g.L, "checksum": self.field.checksum()}


# ---------------------------------------------------------------------------
# discrete kernels
# ---------------------------------------------------------------------------


def _second_difference(F, k: np.ndarray) -> np.ndarray:
    return F(k + 1.0) - 2.0 * F(k) + F(np.abs(k - 1.0))


def time_cell_matrix(S: int, alpha0: float, delta: float = 0.0) -> np.ndarray:
    """W[a, b] = int over cell a x cell b of the time kernel, cells of width 1/S.

    delta = 0 gives |s - r|^(-a0); delta > 0 its Laplace truncation at 1/delta."""
    if not 0 < alpha0 < 1:
        raise ValueError("alpha0 must lie in (0, 1)")
    h = 1.0 / S
    k = np.arange(S, dtype=float)
    if delta == 0:
        c = 1.0 / ((1.0 - alpha0) * (2.0 - alpha0))
        vals = h ** (2.0 - alpha0) * _second_difference(lambda w: c * w ** (2.0 - alpha0), k)
    else:
        def cell(lam, kk):
            x = lam * h
            if kk == 0:
                if x < 1e-4:
                    return h * h * (1.0 - x / 3.0 + x * x / 12.0)
                return 2.0 * (x + math.expm1(-x)) / (lam * lam)
            if x < 1e-8:
                return h * h * math.exp(-lam * (kk - 1) * h)
            return math.exp(-lam * (kk - 1) * h) * math.expm1(-x) ** 2 / (lam * lam)

        vals = np.array([laplace_lambda_integral(lambda lam, kk=kk: cell(lam, kk), 0.0,
                                                 1.0 / delta, alpha0, epsrel=1e-12)
                         for kk in range(S)])
    idx = np.abs(np.subtract.outer(np.arange(S), np.arange(S)))
    return vals[idx]


def space_cell_matrix(m, grid: GridConfig) -> np.ndarray:
    """G with sum_ij G_ij rho_i rho_j approximating int int gamma(x-y) rho(x) rho(y)."""
    h, X = grid.h_x, grid.X
    k = np.arange(X, dtype=float)
    if grid.boundary == "periodic":
        k = np.minimum(k, X - k)
    if isinstance(m, DiracSpace):
        return h * np.eye(X)
    if isinstance(m, RieszRadial):
        if m.d != 1:
            raise ValueError("the solver supports d = 1 only")
        a = m.alpha
        if a >= 1:
            raise ValueError("the d = 1 Riesz kernel needs alpha < 1; use DiracSpace for alpha = 1")
        c = m.c_prime / ((1.0 - a) * (2.0 - a))
        vals = h ** (2.0 - a) * _second_difference(lambda w: c * w ** (2.0 - a), k)
    elif isinstance(m, (FiniteAtomic, TruncatedRadial)):
        if m.d != 1:
            raise ValueError("the solver supports d = 1 only")
        vals = h * h * np.asarray(gamma_eval(m, (k * h)[:, None]), dtype=float).ravel()
    else:
        raise TypeError(f"unsupported measure {m!r}")
    idx = np.abs(np.subtract.outer(np.arange(X), np.arange(X)))
    if grid.boundary == "periodic":
        idx = np.minimum(idx, X - idx)
    return vals[idx]


def _laplacian(grid: GridConfig) -> np.ndarray:
    """Banded form of the discrete -d^2/dx^2 (times h_x^2)."""
    X = grid.X
    ab = np.zeros((3, X))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    ab[2, :-1] = -1.0
    return ab


def _apply_laplacian(g: np.ndarray, grid: GridConfig) -> np.ndarray:
    if grid.boundary == "periodic":
        return 2 * g - np.roll(g, 1, axis=1) - np.roll(g, -1, axis=1)
    pad = np.pad(g, ((0, 0), (1, 1)))
    return 2 * g - pad[:, :-2] - pad[:, 2:]


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


@dataclass
class Problem:
    """A functional with its precomputed time and space matrices."""

    kind: str
    grid: GridConfig
    W: np.ndarray
    G: np.ndarray

    @property
    def gradient_weight(self) -> float:
        return 1.0 if self.kind == "M" else 0.5

    def interaction(self, g: np.ndarray) -> float:
        rho = g * g
        return float(np.sum(self.W * (rho @ self.G @ rho.T)))

    def gradient_energy(self, g: np.ndarray) -> float:
        diff = _apply_laplacian(g, self.grid)
        return float(np.sum(g * diff)) * self.grid.h_s / self.grid.h_x

    def value(self, g: np.ndarray) -> float:
        inter = self.interaction(g)
        main = math.sqrt(max(inter, 0.0)) if self.kind in ("M", "Mtilde") else inter
        return main - self.gradient_weight * self.gradient_energy(g)

    def l2_gradient(self, g: np.ndarray) -> np.ndarray:
        """Gradient in the grid L^2 inner product h_s h_x sum."""
        rho = g * g
        dI = 4.0 * g * (self.W @ (rho @ self.G)) / (self.grid.h_s * self.grid.h_x)
        if self.kind in ("M", "Mtilde"):
            inter = self.interaction(g)
            dI = dI / (2.0 * math.sqrt(inter)) if inter > 0 else np.zeros_like(g)
        dD = 2.0 * _apply_laplacian(g, self.grid) / self.grid.h_x ** 2
        return dI - self.gradient_weight * dD


def make_problem(kind: str, m, alpha0: float = 0.5, delta: float = 0.0,
                 grid: GridConfig = GridConfig()) -> Problem:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if kind == "H":
        grid = GridConfig(1, grid.X, grid.L, grid.boundary)
        W = np.ones((1, 1))
    else:
        if kind == "Edelta" and not delta > 0:
            raise ValueError("Edelta needs delta > 0")
        W = time_cell_matrix(grid.S, alpha0, delta if kind == "Edelta" else 0.0)
    return Problem(kind, grid, W, space_cell_matrix(m, grid))


def eval_functional(kind: str, g: FieldGrid, m, alpha0: float = 0.5, delta: float = 0.0,
                    problem: Problem = None) -> float:
    """Discrete value of the functional at a slice-normalised field."""
    err = np.max(np.abs(g.slice_norms() - 1.0))
    if err > NORM_TOL:
        raise NotNormalized(f"slice normalisation off by {err:.2e}")
    prob = problem or make_problem(kind, m, alpha0, delta, g.grid)
    return prob.value(g.g)


# ---------------------------------------------------------------------------
# trial fields
# ---------------------------------------------------------------------------


def gaussian_field(grid: GridConfig, sigma: float) -> FieldGrid:
    x = grid.x
    return normalize(np.tile(np.exp(-x * x / (2 * sigma * sigma)), (grid.S, 1)), grid)


def trial_library(grid: GridConfig) -> list:
    """Twelve fixed analytic fields: Gaussians, sech and exponential profiles,
    and two time-modulated Gaussians."""
    x = grid.x
    s = (np.arange(grid.S) + 0.5) * grid.h_s
    out = [gaussian_field(grid, sg) for sg in (0.3, 0.6, 1.2, 2.4)]
    out += [normalize(np.tile(1.0 / np.cosh(x / sg), (grid.S, 1)), grid)
            for sg in (0.3, 0.6, 1.2, 2.4)]
    out += [normalize(np.tile(np.exp(-np.abs(x) / sg), (grid.S, 1)), grid) for sg in (0.5, 1.0)]
    for amp in (0.3, 0.6):
        width = 0.8 * (1.0 + amp * np.sin(2 * math.pi * s))
        out.append(normalize(np.exp(-x[None, :] ** 2 / (2 * width[:, None] ** 2)), grid))
    return out


def gaussian_line_search(prob: Problem, sigmas=None) -> FieldGrid:
    """Best slice-constant Gaussian over a coarse log-spaced width grid."""
    grid = prob.grid
    if sigmas is None:
        sigmas = np.geomspace(2 * grid.h_x, grid.L / 3, 24)
    fields = [gaussian_field(grid, sg) for sg in sigmas]
    return max(fields, key=lambda f: prob.value(f.g))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


def _precondition(v: np.ndarray, grid: GridConfig) -> np.ndarray:
    # (I + discrete -Laplacian / h^2)^(-1) per slice
    if grid.boundary == "periodic":
        X = grid.X
        freq = 2 - 2 * np.cos(2 * math.pi * np.arange(X) / X)
        return np.real(np.fft.ifft(np.fft.fft(v, axis=1) / (1 + freq / grid.h_x ** 2), axis=1))
    ab = _laplacian(grid) / grid.h_x ** 2
    ab[1] += 1.0
    return linalg.solve_banded((1, 1), ab, v.T).T


def _tangent_direction(g, grad, grid):
    Pg = _precondition(g, grid)
    Pgrad = _precondition(grad, grid)
    lam = np.sum(g * Pgrad, axis=1) / np.sum(g * Pg, axis=1)
    return Pgrad - lam[:, None] * Pg


def _project(g, grid):
    return g / np.sqrt(np.sum(g * g, axis=1) * grid.h_x)[:, None]


def solve(kind: str, m, alpha0: float = 0.5, delta: float = 0.0,
          grid: GridConfig = GridConfig(), init: FieldGrid = None, max_iter: int = 2000,
          tol: float = 1e-10, on_stall: str = "flag") -> VariationalSolution:
    """Preconditioned projected gradient ascent with Armijo backtracking.

    Starts from the better of ``init`` (or the Gaussian line search) and the
    trial library, so the result dominates every trial field."""
    prob = make_problem(kind, m, alpha0, delta, grid)
    grid = prob.grid
    starts = trial_library(grid) + [init if init is not None else gaussian_line_search(prob)]
    g = max(starts, key=lambda f: prob.value(f.g)).g.copy()
    val = prob.value(g)
    history = [val]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = prob.l2_gradient(g)
        d = _tangent_direction(g, grad, grid)
        slope = float(np.sum(grad * d)) * grid.h_s * grid.h_x
        if slope <= 0:
            converged = True
            break
        step, accepted = STEP0, False
        for _ in range(MAX_HALVINGS):
            trial = _project(g + step * d, grid)
            tv = prob.value(trial)
            if tv >= val + ARMIJO * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        g, val = trial, tv
        history.append(val)
        if len(history) > WINDOW:
            ref = history[-WINDOW - 1]
            if abs(val - ref) <= tol * max(1.0, abs(val)):
                converged = True
                break
    sol = VariationalSolution(val, FieldGrid(g, grid), it, converged, kind, tuple(history))
    if not converged and on_stall == "raise":
        raise Stalled(f"{kind} solve did not converge in {max_iter} iterations", sol)
    return sol


def edge_mass(sol: VariationalSolution, fraction: float = 0.1) -> float:
    """Largest per-slice L^2 mass in the outer ``fraction`` of the box."""
    grid = sol.field.grid
    outer = np.abs(grid.x) > (1.0 - fraction) * grid.L
    return float(np.max(np.sum(sol.field.g[:, outer] ** 2, axis=1) * grid.h_x))


# ---------------------------------------------------------------------------
# algebraic relations
# ---------------------------------------------------------------------------


def relation_E0_M(M_val: float, alpha: float) -> float:
    """E0 from M for a homogeneous covariance of exponent alpha in [0, 2)."""
    if not 0 <= alpha < 2:
        raise ValueError("alpha must lie in [0, 2)")
    if M_val < 0:
        raise ValueError("M must be nonnegative")
    p = (4.0 - alpha) / (2.0 - alpha)
    return (2.0 - alpha) / 2.0 * 2.0 ** (2 * alpha / (2 - alpha)) * (4.0 * M_val / (4.0 - alpha)) ** p


def relation_M_E0(E0_val: float, alpha: float) -> float:
    """Inverse of relation_E0_M."""
    if not 0 <= alpha < 2:
        raise ValueError("alpha must lie in [0, 2)")
    p = (4.0 - alpha) / (2.0 - alpha)
    base = E0_val / ((2.0 - alpha) / 2.0 * 2.0 ** (2 * alpha / (2 - alpha)))
    return (4.0 - alpha) / 4.0 * base ** (1.0 / p)


class Rescale(NamedTuple):
    M: float
    M_tilde: float
    predicted: float
    ratio: float


def rescale_covariance_check(m, alpha0: float = 0.5, grid: GridConfig = GridConfig(),
                             alpha: float = None, **kw) -> Rescale:
    """Solve for M (full gradient) and M-tilde (half gradient); the homogeneity
    of gamma predicts M-tilde = 2^(alpha/(4-alpha)) M."""
    if alpha is None:
        alpha = m.homogeneity
    if alpha is None:
        raise ValueError("rescaling needs a homogeneous covariance")
    M = solve("M", m, alpha0, grid=grid, **kw)
    Mt = solve("Mtilde", m, alpha0, grid=grid, **kw)
    for sol in (M, Mt):
        if not sol.converged:
            raise Stalled(f"{sol.functional} solve did not converge", sol)
    predicted = 2.0 ** (alpha / (4.0 - alpha)) * M.value
    return Rescale(M.value, Mt.value, predicted, Mt.value / M.value)
