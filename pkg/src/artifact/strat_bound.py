"""The universal moment bound as an algorithm: damped-Green norms, the
recursive (Q0, Q1, Q2) certificate, and the Laplace/Fourier closed forms for
G_l(t, x) = exp(-theta t) G(t, x)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, Divergent, InvalidPairing, QuadratureFailure
from .kernels import (DiracSpace, FiniteAtomic, RieszRadial, check_condition,
                      laplace_lambda_integral, radial_integral)
from .moments import _Primitives
from .wick import PairPartition

FULL_RANGE = (0.0, math.inf)


# ---------------------------------------------------------------------------
# xi-integrals of the Laplace/Fourier transform 1 / (a^2 + |xi|^2)
# ---------------------------------------------------------------------------


def _homogeneous_resolvent(m, a: float) -> float:
    """int mu(d xi) / (a^2 + |xi|^2) for nu(rho) = kappa rho^(alpha - 1)."""
    al = m.homogeneity
    return m.radial_coef * a ** (al - 2.0) * math.pi / (2.0 * math.sin(math.pi * al / 2.0))


def xi_integrals(m, a: float, b: float):
    """(int mu / D, int mu / (D E)) with D = a^2 + |xi|^2, E = b^2 + |xi|^2."""
    if isinstance(m, (RieszRadial, DiracSpace)):
        al = m.homogeneity
        fa = _homogeneous_resolvent(m, a)
        if a == b:
            return fa, fa * (2.0 - al) / (2.0 * a * a)
        # (F(a) - F(b)) / (b^2 - a^2) with F(a) = c a^(al - 2), written to avoid cancellation
        fb = _homogeneous_resolvent(m, b)
        diff = fb * math.expm1((al - 2.0) * math.log1p((a - b) / b))
        return fa, diff / ((b - a) * (b + a))
    if isinstance(m, FiniteAtomic):
        r2 = m.radii ** 2
        w = m.weights
        return (float(np.sum(w / (a * a + r2))),
                float(np.sum(w / ((a * a + r2) * (b * b + r2)))))
    p1 = radial_integral(m, lambda r: 1.0 / (a * a + r * r))
    p2 = radial_integral(m, lambda r: 1.0 / ((a * a + r * r) * (b * b + r * r)))
    return p1, p2


def _check(m, alpha0):
    if not check_condition(m, alpha0, "stratonovich").finite:
        raise Divergent("the Stratonovich integrability condition fails")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormTriple:
    norm0: float
    norm1: dict = field(default_factory=dict)
    norm2: dict = field(default_factory=dict)


def norm0(theta: float) -> float:
    """int int exp(-theta t) G(t, x) dx dt = int t exp(-theta t) dt."""
    return theta ** -2.0


def norm1(theta: float, m, alpha0: float, lam_range=FULL_RANGE) -> float:
    a, b = lam_range
    f = lambda lam: xi_integrals(m, theta + lam, theta)[0]
    return laplace_lambda_integral(f, a, b, alpha0)


def norm2_squared(theta: float, m, alpha0: float, lam_range=FULL_RANGE) -> float:
    """Double Laplace/spectral form of int int gamma0(s-t) gamma(x-y) G_l G_l."""
    a, b = lam_range

    def f(lam):
        _, pde = xi_integrals(m, theta + lam, theta)
        return 0.5 * pde + (theta + lam) / (2.0 * theta) * pde

    return laplace_lambda_integral(f, a, b, alpha0)


def compute_norms(theta: float, m, alpha0: float, ranges: dict) -> NormTriple:
    """Norms of exp(-theta t) G(t, x) for each pair (j, k) and its lambda-interval."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    _check(m, alpha0)
    n1, n2 = {}, {}
    for key, rng in ranges.items():
        lo, hi = rng
        if lo < 0 or hi < lo:
            raise ValueError(f"bad lambda interval {rng} for {key}")
        n1[key] = norm1(theta, m, alpha0, rng)
        n2[key] = math.sqrt(max(norm2_squared(theta, m, alpha0, rng), 0.0))
    return NormTriple(norm0(theta), n1, n2)


def full_range_norms(theta: float, m, alpha0: float, pairing: PairPartition) -> NormTriple:
    return compute_norms(theta, m, alpha0, {p: FULL_RANGE for p in pairing.pairs})


# ---------------------------------------------------------------------------
# single and pair spectral integrals: closed forms and direct routes
# ---------------------------------------------------------------------------


def lemma_a1(theta: float, m, alpha0: float) -> float:
    """Gamma(a0)^-1 int int ((theta + lam)^2 + |xi|^2)^-1 lam^(a0-1) d lam mu(d xi)."""
    _check(m, alpha0)
    return norm1(theta, m, alpha0)


def laplace_fourier_green(s: float, rho: float) -> float:
    """int_0^inf exp(-s t) sin(rho t)/rho dt by oscillatory quadrature."""
    if rho == 0.0:
        return s ** -2.0
    # exp(-s t) < 1e-30 beyond T; sin weight handled by the QAWO rule
    T = 70.0 / s
    v, _ = integrate.quad(lambda t: math.exp(-s * t) / rho, 0.0, T,
                          weight="sin", wvar=rho, epsabs=1e-16, epsrel=1e-12, limit=200)
    return v


def lemma_a1_oscillatory(theta: float, m: FiniteAtomic, alpha0: float) -> float:
    """Same quantity with the inner transform evaluated by time quadrature of the
    spatial transform of G."""
    if not isinstance(m, FiniteAtomic):
        raise ConfigError("the oscillatory route is provided for atomic measures")
    total = 0.0
    for r, w in zip(m.radii, m.weights):
        f = lambda lam, r=r: abs(laplace_fourier_green(theta + lam, r))
        total += w * laplace_lambda_integral(f, 0.0, math.inf, alpha0, epsrel=1e-10)
    return total


class LemmaA2(NamedTuple):
    closed: float
    direct: float


def lemma_a2_closed(theta: float, m, alpha0: float) -> float:
    _check(m, alpha0)
    return norm2_squared(theta, m, alpha0)


def _time_cutoff(theta: float) -> float:
    return 80.0 / theta


def pair_integral_direct(m, theta1: float, theta2: float, alpha0: float) -> float:
    """int int exp(-theta1 s - theta2 t) |s - t|^(-a0) int int G(s,x) G(t,y) gamma(x-y)
    by x-space reduction (d = 1) and adaptive time quadrature."""
    if getattr(m, "d", 1) != 1:
        raise ConfigError("direct route is limited to d = 1")
    T = _time_cutoff(min(theta1, theta2))
    prim = _Primitives(m, 2.0 * T)
    total, errs = 0.0, []
    for th_in, th_out in ((theta1, theta2), (theta2, theta1)):
        def inner(t):
            if t == 0.0:
                return 0.0
            v, e = integrate.quad(lambda s: math.exp(-th_in * s) * prim.box(s, t), 0.0, t,
                                  weight="alg", wvar=(0.0, -alpha0), epsabs=1e-15,
                                  epsrel=1e-11, limit=200)
            errs.append(e)
            return math.exp(-th_out * t) * v

        pts = [k / min(theta1, theta2) for k in (1.0, 4.0, 16.0)]
        v, e = integrate.quad(inner, 0.0, T, points=pts, epsabs=1e-15, epsrel=1e-10, limit=400)
        errs.append(e)
        total += v
    err = sum(errs[-1:]) + max(errs, default=0.0) * T
    if err > 1e-6 * max(abs(total), 1e-300):
        raise QuadratureFailure("time quadrature of the pair integral", err)
    return total


def lemma_a2(theta: float, m, alpha0: float) -> LemmaA2:
    """Closed spectral form and the direct x-space/time quadrature."""
    return LemmaA2(lemma_a2_closed(theta, m, alpha0), pair_integral_direct(m, theta, theta, alpha0))


def lemma_a3_rate(thetas: Sequence[float], m, alpha0: float) -> float:
    """Least-squares slope of log lemma_a2.closed against log theta."""
    th = np.asarray(sorted(thetas), dtype=float)
    if len(np.unique(th)) < 2:
        raise ValueError("need at least two distinct dampings to fit a slope")
    vals = np.array([lemma_a2_closed(t, m, alpha0) for t in th])
    return float(np.polyfit(np.log(th), np.log(vals), 1)[0])


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Merge:
    """Time convolution of two adjacent slots."""

    left: object
    right: object


def _leaves(slot):
    if isinstance(slot, _Merge):
        return _leaves(slot.left) + _leaves(slot.right)
    return [slot]


def _expand(slot, role):
    """Leaf-level assignments of a (possibly merged) slot's role."""
    if not isinstance(slot, _Merge):
        return [(slot, role)]
    if role[0] == "Q0":
        # norm0 is multiplicative under convolution
        return _expand(slot.left, role) + _expand(slot.right, role)
    if role[0] == "Q1":
        # norm1 of a convolution <= product of the two norm2's (Cauchy-Schwarz)
        q2 = ("Q2", role[1])
        return _expand(slot.left, q2) + _expand(slot.right, q2)
    # norm2 of a convolution <= norm0(left) * norm2(right)
    return _expand(slot.left, ("Q0", None)) + _expand(slot.right, role)


@dataclass
class BoundCertificate:
    q0: frozenset
    q1: frozenset
    q2: frozenset
    pair_assignment: dict
    bound: float
    cases: list = field(default_factory=list)
    alternatives: list = field(default_factory=list)
    tight_bound: float | None = None

    def check(self, n: int) -> None:
        """Raise InvalidPairing unless the structural rules hold."""
        allq = self.q0 | self.q1 | self.q2
        if len(self.q0) + len(self.q1) + len(self.q2) != 2 * n or allq != set(range(1, 2 * n + 1)):
            raise InvalidPairing("Q0, Q1, Q2 do not partition 1..2n")
        if len(self.q0) != len(self.q1) or len(self.q2) % 2:
            raise InvalidPairing("need |Q0| = |Q1| and |Q2| even")
        if len(self.q0) + len(self.q2) // 2 != n:
            raise InvalidPairing("|Q0| + |Q2|/2 must equal n")
        counts = {}
        for leaf, (role, pair) in self.pair_assignment.items():
            if role == "Q0":
                continue
            counts.setdefault(pair, []).append(role)
        for pair, roles in counts.items():
            if roles not in (["Q1"], ["Q2", "Q2"]):
                raise InvalidPairing(f"pair {pair} appears as {roles}")
        if sum(len(r) == 1 for r in counts.values()) != len(self.q1):
            raise InvalidPairing("Q1 pair count mismatch")

    def record(self) -> dict:
        return {
            "Q0": sorted(self.q0), "Q1": sorted(self.q1), "Q2": sorted(self.q2),
            "assignment": {str(k): [v[0], list(v[1]) if v[1] else None]
                           for k, v in sorted(self.pair_assignment.items())},
            "bound": self.bound, "cases": list(self.cases),
        }


def _norm_lookup(norms, leaf):
    if isinstance(norms, NormTriple):
        return norms
    if isinstance(norms, dict):
        return norms[leaf]
    return norms[leaf - 1]


def _leaf_factor(norms, leaf, role, pair) -> float:
    nt = _norm_lookup(norms, leaf)
    if role == "Q0":
        return nt.norm0
    table = nt.norm1 if role == "Q1" else nt.norm2
    val = table.get(pair, table.get("*"))
    if val is None:
        raise InvalidPairing(f"no norm for pair {pair}")
    return 2.0 * val if role == "Q1" else val


def _bound(assign: dict, norms) -> float:
    return math.prod(_leaf_factor(norms, leaf, role, pair) for leaf, (role, pair) in assign.items())


def _solve(g1: list, g2: list, pair_of: dict, norms, trace: list, alts: list) -> dict:
    """Slot-level recursion; returns leaf -> (role, pair)."""
    slots = g1 + g2
    if len(slots) == 2:
        a, b = slots
        p = pair_of[b]
        if g1 and g2:
            trace.append("base(1,1)")
            return {**_leafmap(a, ("Q2", p)), **_leafmap(b, ("Q2", p))}
        trace.append("base(2,0)" if g1 else "base(0,2)")
        return {**_leafmap(a, ("Q0", None)), **_leafmap(b, ("Q1", p))}

    def partner(slot):
        p = pair_of[slot]
        return next(s for s in slots if s is not slot and pair_of[s] == p)

    def peel(end, home, tr):
        grp1, grp2 = list(g1), list(g2)
        groups = {"g1": grp1, "g2": grp2}
        groups[home].remove(end)
        q = partner(end)
        qgrp = groups["g1"] if q in grp1 else groups["g2"]
        out = _leafmap(end, ("Q1", pair_of[end]))
        new_pairs = dict(pair_of)
        if qgrp[-1] is q:
            qgrp.remove(q)
            out.update(_leafmap(q, ("Q0", None)))
        else:
            i = qgrp.index(q)
            succ = qgrp[i + 1]
            merged = _Merge(q, succ)
            qgrp[i:i + 2] = [merged]
            new_pairs[merged] = pair_of[succ]
        out.update(_solve(grp1, grp2, new_pairs, norms, tr, alts))
        return out

    e1 = g1[-1] if g1 else None
    e2 = g2[-1] if g2 else None
    if e2 is not None and partner(e2) in g2:
        trace.append("case1(2n)")
        return peel(e2, "g2", trace)
    if e1 is not None and partner(e1) in g1:
        trace.append("case1(n1)")
        return peel(e1, "g1", trace)
    if partner(e2) is e1:
        trace.append("case2")
        p = pair_of[e2]
        out = {**_leafmap(e1, ("Q2", p)), **_leafmap(e2, ("Q2", p))}
        out.update(_solve(g1[:-1], g2[:-1], pair_of, norms, trace, alts))
        return out
    trace.append("case3")
    ta, tb = [], []
    cand_a = peel(e2, "g2", ta)
    cand_b = peel(e1, "g1", tb)
    ba, bb = _bound(cand_a, norms), _bound(cand_b, norms)
    alts.append({"peel_2n": ba, "peel_n1": bb})
    if ba >= bb:
        trace.extend(ta)
        return cand_a
    trace.extend(tb)
    return cand_b


def _leafmap(slot, role):
    return dict(_expand(slot, role))


def theorem3_certificate(n1: int, n2: int, pairing: PairPartition, norms) -> BoundCertificate:
    """Run the induction of the moment bound as a recursive algorithm."""
    if n1 < 0 or n2 < 0 or (n1 + n2) % 2 or n1 + n2 == 0:
        raise InvalidPairing("n1 + n2 must be a positive even number")
    if not isinstance(pairing, PairPartition):
        pairing = PairPartition(pairing)
    if 2 * pairing.n != n1 + n2:
        raise InvalidPairing("pairing size does not match n1 + n2")
    pair_of = {}
    for p in pairing.pairs:
        for i in p:
            pair_of[i] = p
    g1 = list(range(1, n1 + 1))
    g2 = list(range(n1 + 1, n1 + n2 + 1))
    trace, alts = [], []
    assign = _solve(g1, g2, pair_of, norms, trace, alts)
    bound = _bound(assign, norms)
    q = {r: frozenset(l for l, (role, _) in assign.items() if role == r) for r in ("Q0", "Q1", "Q2")}
    cert = BoundCertificate(q["Q0"], q["Q1"], q["Q2"], dict(sorted(assign.items())), bound,
                            trace, alts)
    if trace and trace[0].startswith("case1"):
        cert.tight_bound = 0.5 * bound
    cert.check(pairing.n)
    return cert


# ---------------------------------------------------------------------------
# n = 1 domination
# ---------------------------------------------------------------------------


class Domination(NamedTuple):
    lhs: float
    bound: float


def _lag_integral(m, theta: float, alpha0: float) -> float:
    """int_0^inf exp(-theta u) u^(-a0) int G(u, y) gamma(y) dy du (d = 1)."""
    T = _time_cutoff(theta)
    prim = _Primitives(m, 2.0 * T)
    a = prim.power
    v, err = integrate.quad(lambda u: math.exp(-theta * u) * prim.k_hat(u), 0.0, T,
                            weight="alg", wvar=(a - alpha0, 0.0), epsabs=1e-15,
                            epsrel=1e-11, limit=400)
    if err > 1e-7 * max(abs(v), 1e-300):
        raise QuadratureFailure("lag integral", err)
    return v


def bound_domination_check(case, theta, m, alpha0: float) -> Domination:
    """Left side of the n = 1 bound by direct quadrature against the certificate."""
    n1, n2 = case
    if (n1, n2) not in ((1, 1), (2, 0), (0, 2)):
        raise ValueError("n = 1 configurations are (1,1), (2,0), (0,2)")
    th = (float(theta), float(theta)) if np.isscalar(theta) else tuple(map(float, theta))
    pairing = PairPartition(((1, 2),))
    norms = [full_range_norms(t, m, alpha0, pairing) for t in th]
    cert = theorem3_certificate(n1, n2, pairing, norms)
    if (n1, n2) == (1, 1):
        lhs = pair_integral_direct(m, th[0], th[1], alpha0)
    else:
        lhs = norm0(th[0]) * _lag_integral(m, th[1], alpha0)
    return Domination(lhs, cert.bound)


def base_case_printed_bound(theta1: float, theta2: float, m, alpha0: float) -> float:
    """The (0, 2) bound with Q0 = {2}, Q1 = {1} (roles swapped)."""
    pairing = PairPartition(((1, 2),))
    n_a = full_range_norms(theta1, m, alpha0, pairing)
    n_b = full_range_norms(theta2, m, alpha0, pairing)
    return 2.0 * n_a.norm1[(1, 2)] * n_b.norm0
