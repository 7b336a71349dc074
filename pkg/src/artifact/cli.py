"""Command-line runner for the verification suites."""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import asympt, kernels, localtime, moments, strat_bound, variational, wavegreen, wick
from .errors import ArtifactError, ConfigError

HEADER = ("check_id", "equation", "inputs", "expected", "actual", "tolerance", "pass")

DEFAULTS = {
    "measure.kind": "dirac",
    "measure.d": 1,
    "measure.c": 1.0,
    "time.alpha0": 0.5,
    "time.delta": 0.0,
    "seed": 42,
    "mc": 2000,
    "tol": 1e-6,
    "theta": 2.0,
    "out": "runs",
}


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _coerce(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config(path) -> dict:
    """Flat ``key = value`` file; '#' comments; dotted keys allowed."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return {k: _coerce(v) for k, v in parser["run"].items()}


def effective_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    flags = {"seed": args.seed, "mc": args.mc, "tol": args.tol, "out": args.out,
             "measure.d": args.d, "measure.alpha": args.alpha, "time.alpha0": args.alpha0,
             "theta": args.theta}
    for key, val in flags.items():
        if val is not None:
            cfg[key] = val
    if args.alpha is not None and not (args.config and "measure.kind" in read_config(args.config)):
        cfg["measure.kind"] = "dirac" if args.alpha == 1.0 and cfg["measure.d"] == 1 else "riesz"
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if int(cfg["mc"]) < 2:
        raise ConfigError("mc must be at least 2")
    return cfg


def config_hash(cfg: dict, suite: str) -> str:
    body = json.dumps({"suite": suite, **{k: v for k, v in cfg.items() if k != "out"}},
                      sort_keys=True, default=str)
    return hashlib.sha256(body.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# report rows
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


@dataclass
class Check:
    check_id: str
    equation: str
    inputs: dict
    expected: object
    actual: object
    tolerance: object
    passed: bool

    def row(self) -> tuple:
        return (self.check_id, self.equation, json.dumps(self.inputs, sort_keys=True, default=str),
                _fmt(self.expected), _fmt(self.actual), _fmt(self.tolerance), _fmt(self.passed))


def _close(cid, eq, inputs, expected, actual, tol, rel=False) -> Check:
    scale = abs(expected) if rel else 1.0
    ok = bool(abs(actual - expected) <= tol * scale)
    return Check(cid, eq, inputs, expected, actual, tol, ok)


def _holds(cid, eq, inputs, value, condition: bool, expected="true") -> Check:
    return Check(cid, eq, inputs, expected, value, "", bool(condition))


@dataclass
class SuiteResult:
    checks: list
    trends: dict


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def suite_green(cfg) -> SuiteResult:
    d = int(cfg["measure.d"])
    out = []
    if d == 1:
        for lam in (0.5, 1.0, 2.0):
            for x in (0.0, 0.5):
                s = wavegreen.subordination_check(lam, x, 1)
                out.append(_close(f"green.subord.d1.lam{lam}.x{x}", "subordination",
                                  {"lam": lam, "x": x}, s.rhs, s.lhs, float(cfg["tol"])))
                out.append(_close(f"green.subord_closed.d1.lam{lam}.x{x}", "subordination closed form",
                                  {"lam": lam, "x": x}, math.exp(-lam * x) / (2 * lam), s.lhs, float(cfg["tol"])))
    if d == 2:
        from scipy import special
        for lam in (0.5, 1.0, 2.0):
            s = wavegreen.subordination_check(lam, (0.5, 0.0), 2)
            out.append(_close(f"green.subord.d2.lam{lam}", "subordination", {"lam": lam, "r": 0.5},
                              special.k0(lam * 0.5) / (2 * math.pi), s.lhs, float(cfg["tol"])))
    for t in (0.5, 1.0, 2.0):
        if d == 3:
            mass = wavegreen.green_mass(wavegreen.GreenSpec(3, 1e-3), t)
            out.append(_close(f"green.mass.d3.t{t}", "green mass", {"t": t, "eta": 1e-3}, t, mass, 1e-3))
        else:
            mass = wavegreen.green_mass(wavegreen.GreenSpec(d), t)
            out.append(_close(f"green.mass.d{d}.t{t}", "green mass", {"t": t}, t, mass, 1e-8))
    return SuiteResult(out, {})


def suite_wick(cfg) -> SuiteResult:
    out = []
    for n, count in zip(range(1, 6), (1, 3, 15, 105, 945)):
        got = len(wick.enumerate_pairings(n))
        out.append(_close(f"wick.count.n{n}", "pairing count", {"n": n}, count, got, 0))
    for size, val in ((4, 3.0), (6, 15.0)):
        cov = np.ones((size, size))
        out.append(_close(f"wick.ones.{size}", "wick moment", {"size": size}, val,
                          wick.wick_moment(cov), 0))
        mc = wick.wick_mc_crosscheck(cov, int(cfg["mc"]) * 10, int(cfg["seed"]))
        out.append(_close(f"wick.mc.{size}", "wick moment mc", {"size": size, "m": int(cfg["mc"]) * 10},
                          mc.exact, mc.mc, 4 * mc.stderr))
    return SuiteResult(out, {})


def suite_laplace(cfg) -> SuiteResult:
    out = []
    for a0 in (0.3, 0.5, 0.7):
        for u in (0.1, 1.0, 3.0):
            v = kernels.time_kernel_eval(kernels.TimeKernel(a0), u)
            out.append(_close(f"laplace.power.a{a0}.u{u}", "laplace power identity",
                              {"alpha0": a0, "u": u}, u ** -a0, v, 1e-6, rel=True))
    rng = np.random.default_rng(int(cfg["seed"]))
    worst = 0.0
    for _ in range(50):
        u, v, a0 = rng.uniform(0.05, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(0.1, 0.9)
        z = kernels.complex_power(a0, u, v)
        q = kernels.complex_power_quadrature(a0, u, v)
        worst = max(worst, abs(z - q))
    out.append(_close("laplace.complex.random50", "complex power branch", {"points": 50},
                      0.0, worst, float(cfg["tol"])))
    return SuiteResult(out, {})


def _suite_measure(cfg):
    return kernels.measure_from_config(cfg)


def suite_s2(cfg) -> SuiteResult:
    out = []
    a0 = float(cfg["time.alpha0"])
    measures = {"config": _suite_measure(cfg), "cosine": kernels.cosine_atoms(1.0)}
    for name, m in measures.items():
        for t in (0.5, 1.0):
            red = moments.s2_expectation_reduced(t, m, a0)
            direct = moments.s2n_expectation_direct(moments.MomentSpec(1, t, m, a0)).value
            out.append(_close(f"s2.routes.{name}.t{t}", "second moment routes",
                              {"measure": name, "alpha0": a0, "t": t}, red, direct, 1e-3, rel=True))
        alpha = getattr(m, "homogeneity", None)
        if alpha is not None:
            ratio = moments.s2_expectation_reduced(2.0, m, a0) / moments.s2_expectation_reduced(1.0, m, a0)
            out.append(_close(f"s2.scaling.{name}", "second moment scaling", {"alpha0": a0},
                              2.0 ** (4 - alpha - a0), ratio, 1e-3, rel=True))
    return SuiteResult(out, {})


def suite_bound(cfg) -> SuiteResult:
    out = []
    unit = strat_bound.NormTriple(1.0, {"*": 1.0}, {"*": 1.0})
    total = failures = 0
    for n in range(1, 5):
        for p in wick.enumerate_pairings(n):
            for n1 in range(0, 2 * n + 1):
                total += 1
                try:
                    strat_bound.theorem3_certificate(n1, 2 * n - n1, p, unit)
                except ArtifactError:
                    failures += 1
    out.append(_close("bound.certificates.2n_le_8", "certificate invariants", {"count": total},
                      0, failures, 0))
    a0 = float(cfg["time.alpha0"])
    m = kernels.DiracSpace()
    for case in ((1, 1), (2, 0), (0, 2)):
        dom = strat_bound.bound_domination_check(case, (1.0, 2.0), m, a0)
        out.append(_holds(f"bound.n1.{case[0]}{case[1]}", "n = 1 domination",
                          {"case": list(case), "theta": [1.0, 2.0], "alpha0": a0},
                          dom.lhs / dom.bound, dom.lhs <= dom.bound * (1 + 1e-3), "<= 1.001"))
    return SuiteResult(out, {})


def suite_lemma_a(cfg) -> SuiteResult:
    m = kernels.DiracSpace()
    a2 = strat_bound.lemma_a2(1.0, m, 0.5)
    out = [_close("lemma_a.pair.closed_vs_direct", "pair integral closed form",
                  {"theta": 1.0, "alpha0": 0.5}, a2.closed, a2.direct, 1e-3, rel=True)]
    a1 = strat_bound.lemma_a1(1.0, m, 0.5)
    out.append(_close("lemma_a.single.closed", "single integral closed form", {"theta": 1.0, "alpha0": 0.5},
                      0.5 * math.gamma(0.5), a1, 1e-9, rel=True))
    thetas = (4.0, 8.0, 16.0, 32.0)
    slope = strat_bound.lemma_a3_rate(thetas, m, 0.5)
    out.append(_close("lemma_a.rate.slope", "pair integral decay slope", {"thetas": list(thetas)},
                      m.homogeneity + 0.5 - 4.0, slope, 1e-3))
    trend = [(t, strat_bound.lemma_a2_closed(t, m, 0.5)) for t in thetas]
    return SuiteResult(out, {"lemma_a_rate": trend})


def suite_representation(cfg) -> SuiteResult:
    theta = float(cfg["theta"])
    mc = int(cfg["mc"])
    r = localtime.representation_check_n1(theta, kernels.cosine_atoms(1.0), 0.5, mc,
                                          int(cfg["seed"]), K=512)
    check = _close("representation.n1", "laplace representation", {"theta": theta, "m": mc, "K": 512},
                   r.lhs, r.rhs, 3 * r.stderr + r.quad_tol)
    return SuiteResult([check], {})


def suite_localtime(cfg) -> SuiteResult:
    out = []
    seed, mc = int(cfg["seed"]), int(cfg["mc"])
    m, eps = kernels.DiracSpace(), 0.01
    p = localtime.simulate_paths(1, 1.0, 32, mc, seed)
    for theta in (1.0, 2.0):
        for a0 in (0.3, 0.5):
            est = localtime.ensemble_mean(localtime.hamiltonian_complex(p, theta, a0, m, eps), p, "complex")
            inp = {"theta": theta, "alpha0": a0, "m": mc, "K": 32}
            out.append(_holds(f"localtime.positivity.re.th{theta}.a{a0}", "complex hamiltonian positivity",
                              inp, est.value.real, est.value.real >= -3 * est.stderr, ">= -3 stderr"))
            out.append(_holds(f"localtime.positivity.im.th{theta}.a{a0}", "complex hamiltonian positivity",
                              inp, est.value.imag, abs(est.value.imag) <= 3 * est.stderr, "|.| <= 3 stderr"))
    chain = localtime.kernel_chain_failures(localtime.random_kernel_samples(100_000, seed), 2.0, 0.5)
    out.append(_close("localtime.kernel_chain", "kernel chain", {"n": chain.n}, 0, chain.failures, 0))
    tf = localtime.hamiltonian_time_frac(p, 2.0, 1.0, 0.5, m, eps)
    to = localtime.hamiltonian_time_only(p, 0.5, m, eps)
    bo = localtime.hamiltonian_beta_only(p, 0.5, m, eps)
    bad = int(np.sum(tf > np.minimum(2.0 ** -0.5 * to, bo) * (1 + 1e-12)))
    out.append(_close("localtime.domination", "time-fractional domination", {"m": mc}, 0, bad, 0))
    var = float(np.var(p.B_nodes[:, -1, 0], ddof=1))
    out.append(_close("localtime.variance", "brownian variance", {"m": mc}, 1.0, var,
                      5 / math.sqrt(mc)))
    trend = localtime.exp_moment_trend(0.1, 1.0, 1.0, 0.5, m, [1.0, 2.0, 4.0], min(mc, 500), seed,
                                       K=32, eps=eps)
    return SuiteResult(out, {"exp_moment_trend": trend})


def suite_variational(cfg) -> SuiteResult:
    out = []
    m = kernels.DiracSpace()
    a0 = float(cfg["time.alpha0"])
    grid = variational.GridConfig()
    for kind in ("M", "E0"):
        sol = variational.solve(kind, m, a0, grid=grid)
        prob = variational.make_problem(kind, m, a0, grid=grid)
        best = max(prob.value(f.g) for f in variational.trial_library(grid))
        out.append(_holds(f"variational.{kind}.trials", "trial domination", {"kind": kind},
                          sol.value - best, sol.value >= best and sol.converged, ">= 0"))
    vals = [variational.solve("Edelta", m, a0, d, grid=grid).value for d in (0.5, 0.25, 0.125)]
    out.append(_holds("variational.Edelta.monotone", "truncation monotonicity", {"deltas": [0.5, 0.25, 0.125]},
                      json.dumps([round(v, 12) for v in vals]), vals[0] <= vals[1] <= vals[2]))
    r = variational.rescale_covariance_check(m, a0, grid=grid)
    out.append(_close("variational.rescale", "covariance rescaling", {"alpha": 1.0},
                      2.0 ** (1 / 3), r.ratio, 0.01, rel=True))
    H = variational.solve("H", m, grid=grid).value
    out.append(_close("variational.H.delta", "time-independent constant", {}, 1.0 / 6.0, H, 0.01, rel=True))
    return SuiteResult(out, {})


def suite_asympt(cfg) -> SuiteResult:
    from scipy import special
    out = []
    for M in (0.3, 0.63, 2.0):
        for alpha in (0.5, 1.0, 1.5):
            E0 = variational.relation_E0_M(M, alpha)
            back = variational.relation_M_E0(E0, alpha)
            out.append(_close(f"asympt.roundtrip.M{M}.a{alpha}", "E0-M relation", {"M": M, "alpha": alpha},
                              M, back, 1e-12, rel=True))
            if alpha + 0.4 < 2 and alpha <= 1:
                r = asympt.RateInputs(alpha, 0.4, M_val=M)
                out.append(_close(f"asympt.prefactor.M{M}.a{alpha}", "moment base via E0 and M",
                                  {"M": M, "alpha": alpha, "alpha0": 0.4},
                                  asympt.predict_moment_prefactor_M(3, r),
                                  asympt.predict_moment_prefactor(3, r), 1e-12, rel=True))
    trends = {}
    for g, th in ((1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 3.0)):
        seq = asympt.mittag_leffler_rate(th, g, [10.0, 100.0, 1000.0, 1e4, 1e5])
        trends[f"mittag_leffler_g{g}_th{th}"] = seq
        lim = g * th ** (1 / g)
        if g == 1.0:
            out.append(_close(f"asympt.ml.g{g}.th{th}", "mittag-leffler rate", {"b": 1000.0},
                              lim, seq[2][1], 1e-3))
        else:
            b = 1000.0
            exact = (math.log(special.i0e(2 * math.sqrt(th * b))) + 2 * math.sqrt(th * b)) / math.sqrt(b)
            out.append(_close(f"asympt.ml_bessel.g{g}.th{th}", "mittag-leffler bessel form", {"b": b},
                              exact, seq[2][1], 1e-9, rel=True))
            out.append(_close(f"asympt.ml.g{g}.th{th}", "mittag-leffler rate", {"b": 1e5},
                              lim, seq[4][1], 0.01, rel=True))
    tail = [asympt.gamma_tail_negligibility(eta, 200, 0.5, 1.0) for eta in (2.0, 1.0, 0.5, 0.25)]
    out.append(_holds("asympt.gamma_tail.monotone", "gamma tail", {"n": 200},
                      json.dumps([round(v, 12) for v in tail]), all(np.diff(tail) < 0)))
    rep = asympt.small_n_consistency(kernels.DiracSpace(), 0.5)
    out.append(_close("asympt.small_n.exponent", "second moment scaling", {"alpha0": 0.5},
                      rep["exponent_expected"], rep["exponent_fit"], 1e-3, rel=True))
    rate = asympt.predict_logEu_rate(asympt.RateInputs(1.0, 0.5, M_val=1.0))
    out.append(_close("asympt.rate.exponent", "moment rate exponent", {"alpha": 1.0, "alpha0": 0.5},
                      1.25, rate["exponent"], 1e-15))
    return SuiteResult(out, trends)


SUITES: dict[str, Callable] = {
    "green": suite_green,
    "wick": suite_wick,
    "laplace": suite_laplace,
    "s2": suite_s2,
    "bound": suite_bound,
    "lemma-a": suite_lemma_a,
    "representation": suite_representation,
    "localtime": suite_localtime,
    "variational": suite_variational,
    "asympt": suite_asympt,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def run_suite(name: str, cfg: dict) -> SuiteResult:
    if name == "all":
        checks, trends = [], {}
        for key in SUITES:
            res = SUITES[key](cfg)
            checks += res.checks
            trends.update(res.trends)
        return SuiteResult(checks, trends)
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}")
    return SUITES[name](cfg)


def render_csv(checks) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for c in sorted(checks, key=lambda c: c.check_id):
        w.writerow(c.row())
    return buf.getvalue()


def write_report(name: str, cfg: dict, res: SuiteResult) -> Path:
    run_dir = Path(cfg["out"]) / f"{name}-{config_hash(cfg, name)}"
    run_dir.mkdir(parents=True, exist_ok=True)
    echoed = {k: cfg[k] for k in sorted(cfg) if k != "out"}
    header = "".join(f"# {k} = {_fmt(v)}\n" for k, v in echoed.items())
    (run_dir / "report.csv").write_text(header + render_csv(res.checks), encoding="utf-8")
    ordered = sorted(res.checks, key=lambda c: c.check_id)
    failing = [c.check_id for c in ordered if not c.passed]
    summary = {"suite": name, "config": echoed,
               "config_hash": config_hash(cfg, name), "checks": len(ordered),
               "passed": len(ordered) - len(failing), "failed": failing}
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str)
                                          + "\n", encoding="utf-8")
    for key, rows in sorted(res.trends.items()):
        lines = "".join(" ".join(_fmt(v) for v in row) + "\n" for row in rows)
        (run_dir / f"{key}.dat").write_text(lines, encoding="utf-8")
    return run_dir


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact", description="Run numerical verification suites.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a suite")
    run.add_argument("suite_pos", nargs="?", metavar="suite", choices=[*SUITES, "all"])
    run.add_argument("--suite", choices=[*SUITES, "all"])
    run.add_argument("--config")
    run.add_argument("--seed", type=int)
    run.add_argument("--mc", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--out")
    run.add_argument("--d", type=int)
    run.add_argument("--alpha", type=float)
    run.add_argument("--alpha0", type=float)
    run.add_argument("--theta", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    name = args.suite or args.suite_pos
    if name is None:
        print("error: name a suite", file=sys.stderr)
        return 2
    try:
        cfg = effective_config(args)
        res = run_suite(name, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run_dir = write_report(name, cfg, res)
    ordered = sorted(res.checks, key=lambda c: c.check_id)
    failing = [c for c in ordered if not c.passed]
    print(f"{len(ordered) - len(failing)}/{len(ordered)} checks passed; report in {run_dir}")
    if failing:
        print(f"first failing check: {failing[0].check_id}", file=sys.stderr)
        return 1
    return 0
