"""Large-time rate predictors, the Mittag-Leffler series asymptotic and the
Gamma-tail bound used to discard long horizons."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import HypothesisViolated
from .moments import s2_expectation_reduced
from .variational import relation_E0_M

SERIES_RTOL = 1e-14
CF_MAX = 10_000


@dataclass(frozen=True)
class RateInputs:
    alpha: float
    alpha0: float
    M_val: float = None
    E0_val: float = None
    d: int = 1

    def __post_init__(self):
        if not 0 < self.alpha0 < 1:
            raise HypothesisViolated("alpha0 must lie in (0, 1)")
        if not 0 < self.alpha <= self.d:
            raise HypothesisViolated("alpha must lie in (0, d]")
        if self.alpha == self.d and self.d != 1:
            raise HypothesisViolated("alpha = d is admissible only for d = 1")
        if self.alpha0 + self.alpha >= 2:
            raise HypothesisViolated("need alpha0 + alpha < 2")
        for v in (self.M_val, self.E0_val):
            if v is not None and v < 0:
                raise ValueError("variational constants are nonnegative")

    @property
    def E0(self) -> float:
        if self.E0_val is not None:
            return self.E0_val
        if self.M_val is None:
            raise ValueError("need M_val or E0_val")
        return relation_E0_M(self.M_val, self.alpha)

    def record(self) -> dict:
        return {"alpha": self.alpha, "alpha0": self.alpha0, "M": self.M_val,
                "E0": self.E0_val, "d": self.d}


def _M_base(r: RateInputs) -> float:
    a, a0 = r.alpha, r.alpha0
    p, q = 4 - a - 2 * a0, 4 - a - a0
    return 2 * p ** (p / 2) / q ** q * (r.M_val / (4 - a)) ** ((4 - a) / 2)


def predict_logEu_rate(r: RateInputs) -> dict:
    """Exponent and constant of log E u(t, x) ~ constant * t^exponent."""
    if r.M_val is None:
        raise ValueError("the rate is stated in terms of M")
    a = r.alpha
    exponent = (4 - a - r.alpha0) / (3 - a)
    constant = (3 - a) * _M_base(r) ** (1 / (3 - a))
    return {"inputs": r.record(), "exponent": exponent, "constant": constant,
            "provenance": "first-moment rate"}


def predict_logEup_rate(p: int, r: RateInputs) -> dict:
    """The p-th moment pattern p^((4-a)/(3-a)) times the first-moment constant.

    Unproved; the record always carries the conjecture flag."""
    if p < 1:
        raise ValueError("p must be a positive integer")
    base = predict_logEu_rate(r)
    a = r.alpha
    return {"inputs": dict(r.record(), p=p), "exponent": base["exponent"],
            "constant": p ** ((4 - a) / (3 - a)) * base["constant"],
            "provenance": "p-th moment pattern", "conjecture": True}


def moment_base_from_M(r: RateInputs) -> float:
    """lim (1/n) log (n!)^(3-a) E S_2n at t = 1, exponentiated, through M."""
    return _M_base(r)


def predict_moment_prefactor(n: int, r: RateInputs) -> float:
    """Predicted growth base to the power n, written through E0."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    a, a0 = r.alpha, r.alpha0
    p, q = 4 - a - 2 * a0, 4 - a - a0
    base = p ** (p / 2) / (8 * q ** q) * (2 * r.E0 / (2 - a)) ** ((2 - a) / 2)
    return base ** n


def predict_moment_prefactor_M(n: int, r: RateInputs) -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _M_base(r) ** n


def log_mittag_leffler(theta: float, gamma: float, b: float) -> float:
    """log sum_n theta^n b^n / (n!)^gamma, summed in log space to a relative
    tail below SERIES_RTOL."""
    if not (theta > 0 and gamma > 0 and b > 0):
        raise ValueError("theta, gamma and b must be positive")
    x = math.log(theta * b)
    mode = max(0, int(math.exp(x / gamma)))
    cut = -math.log(SERIES_RTOL) + 10.0
    n = np.arange(0, 2 * mode + 64)
    while True:
        logs = n * x - gamma * special.gammaln(n + 1.0)
        top = logs.max()
        # terms past the mode decrease at least geometrically
        if logs[-1] < top - cut and logs[-1] < logs[-2]:
            return float(special.logsumexp(logs))
        n = np.arange(0, 2 * len(n))


def mittag_leffler_rate(theta: float, gamma: float, b_list) -> list:
    """(b, b^(-1/gamma) log sum) pairs; the limit is gamma theta^(1/gamma)."""
    return [(float(b), log_mittag_leffler(theta, gamma, b) / b ** (1 / gamma)) for b in b_list]


def _log_upper_gamma_cf(a: float, x: float) -> float:
    # log Q(a, x) via the continued fraction, for x > a + 1
    tiny = 1e-300
    bb = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / bb
    h = d
    for i in range(1, CF_MAX):
        an = -i * (i - a)
        bb += 2.0
        d = an * d + bb
        d = tiny if abs(d) < tiny else d
        c = bb + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return -x + a * math.log(x) - special.gammaln(a) + math.log(h)


def log_upper_gamma_q(a: float, x: float) -> float:
    """log of the regularized upper incomplete Gamma Q(a, x); -inf on underflow."""
    q = special.gammaincc(a, x)
    if q > 1e-280:
        return math.log(q)
    if x > a + 1:
        return _log_upper_gamma_cf(a, x)
    return -math.inf


def gamma_tail_negligibility(eta: float, n: int, alpha0: float, c: float) -> float:
    """n^-1 log[(n!)^-(1-a0) int_{n/eta^2}^inf t^((1-a0)n) e^(-ct) dt]."""
    if not (eta > 0 and c > 0):
        raise ValueError("eta and c must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    k = (1.0 - alpha0) * n
    lower = n / eta ** 2
    log_int = -(k + 1) * math.log(c) + special.gammaln(k + 1) + log_upper_gamma_q(k + 1, c * lower)
    return (log_int - (1.0 - alpha0) * special.gammaln(n + 1.0)) / n


def small_n_consistency(measure, alpha0: float, t_grid=(1.0, 2.0), M_val: float = None) -> dict:
    """Two-point log fit of E S_2 = A t^p at n = 1, with the n = 1 slice of the
    large-n prediction reported alongside for information only."""
    alpha = measure.homogeneity
    if alpha is None:
        raise ValueError("needs a homogeneous measure")
    t1, t2 = t_grid[0], t_grid[-1]
    v1 = s2_expectation_reduced(t1, measure, alpha0)
    v2 = s2_expectation_reduced(t2, measure, alpha0)
    p = math.log(v2 / v1) / math.log(t2 / t1)
    A = v1 / t1 ** p
    out = {"exponent_fit": p, "exponent_expected": 4 - alpha - alpha0, "A": A,
           "prefactor_comparison": "informational"}
    if M_val is not None:
        out["predicted_base"] = predict_moment_prefactor_M(1, RateInputs(alpha, alpha0, M_val))
    return out
