"""Self-checks of the coefficient transforms, the engine and the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .engine import PathStream, TimeGrid, simulate_batch, simulate_path
from .models import Model1D, SvModel, coefficients, coefficients_1d, coefficients_sv
from .pricing import McConfig, bachelier_barrier_exact, norm_cdf, price_pcs, price_pathwise
from .symmetry import (
    BarrierContract,
    call_payoff,
    fold_double,
    fold_points,
    reflect_payoff_single,
    symmetrize_single_1d,
    symmetrize_single_sv,
    unfold_payoff_double,
)

REL_TOL = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _close(a, b) -> tuple[bool, float]:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    err = np.abs(a - b) / np.maximum(1.0, np.abs(b))
    worst = float(err.max()) if err.size else 0.0
    return worst <= REL_TOL, worst


def _models():
    return {
        "bs": Model1D("bs", r=0.02, sigma=0.2),
        "cev": Model1D("cev", r=0.02, sigma=0.45, beta=0.75),
        "abm": Model1D("abm", sigma=10.0),
        "heston": SvModel("heston", r=0.02, kappa=1.0, theta=0.03, nu=0.03, rho=-0.7, v0=0.03),
        "sabr": SvModel("lambda_sabr", r=0.02, kappa=1.0, theta=0.3, nu=0.3, rho=-0.7, beta=0.75, v0=0.3),
    }


def image_series(sigma11, K: float, Kp: float, x, v, terms: int = 50):
    """Truncated two-sided image series for a folded coefficient, evaluated by brute force."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for n in range(-terms, terms + 1):
        shift = (2 * n) * Kp
        even = (K + 2 * n * Kp <= x) & (x < K + (2 * n + 1) * Kp)
        odd = (K + (2 * n - 1) * Kp <= x) & (x < K + 2 * n * Kp)
        if even.any():
            total = total + np.where(even, sigma11(np.where(even, x - shift, K), v), 0.0)
        if odd.any():
            total = total - np.where(odd, sigma11(np.where(odd, 2 * K - (x - shift), K), v), 0.0)
    return total


def _coefficient_checks(rng, points: int) -> list[Check]:
    out = []
    models = _models()
    K = 90.0

    xs = rng.uniform(1.0, 300.0, points)
    vs = rng.uniform(-0.5, 5.0, points)
    same = True
    for m in models.values():
        c = coefficients(m)
        same &= np.array_equal(c.sigma11(xs, vs), c.sigma11(xs, vs)) and np.array_equal(c.mu1(xs, vs), c.mu1(xs, vs))
        if c.dimension == 2:
            same &= all(np.array_equal(f(vs), f(vs)) for f in (c.sigma21, c.sigma22, c.mu2))
    out.append(Check("coefficients-deterministic", bool(same), f"{points} states x {len(models)} models"))

    bs = coefficients_1d(Model1D("bs", r=0.02, sigma=0.3))
    cev1 = coefficients_1d(Model1D("cev", r=0.02, sigma=0.3, beta=1.0))
    xp = rng.uniform(1e-3, 500.0, points)
    ok = np.array_equal(bs.sigma(xp), cev1.sigma(xp)) and np.array_equal(bs.mu(xp), cev1.mu(xp))
    out.append(Check("bs-equals-cev-beta1", bool(ok), "bit-identical sigma and mu"))

    h = models["heston"]
    hc = coefficients_sv(h)
    v = rng.uniform(0.0, 5.0, points)
    ok, worst = _close(hc.sigma21(v) ** 2 + hc.sigma22(v) ** 2, h.nu**2 * np.maximum(v, 0.0))
    out.append(Check("heston-correlation-decomposition", ok, f"max rel err {worst:.2e}"))

    worst_all, ok_all = 0.0, True
    for name in ("bs", "cev", "abm"):
        s = symmetrize_single_1d(coefficients(models[name]), K)
        x = rng.uniform(1.0, 2 * K - 1.0, points)
        x = x[x != K]
        for a, b in ((s.sigma(x), s.sigma(2 * K - x)), (s.mu(x), -s.mu(2 * K - x))):
            ok, worst = _close(a, b)
            ok_all &= ok
            worst_all = max(worst_all, worst)
    out.append(Check("single-1d-reflection-identities", ok_all, f"max rel err {worst_all:.2e}"))

    worst_all, ok_all = 0.0, True
    for name in ("heston", "sabr"):
        s = symmetrize_single_sv(coefficients(models[name]), K)
        x = rng.uniform(1.0, 2 * K - 1.0, points)
        x = x[x != K]
        vv = rng.uniform(0.0, 2.0, x.size)
        for a, b in ((s.sigma11(x, vv), -s.sigma11(2 * K - x, vv)), (s.mu1(x, vv), -s.mu1(2 * K - x, vv))):
            ok, worst = _close(a, b)
            ok_all &= ok
            worst_all = max(worst_all, worst)
    out.append(Check("single-sv-antisymmetry", ok_all, f"max rel err {worst_all:.2e}"))

    worst_all, ok_all = 0.0, True
    for name, Kd, Kp in (("heston", 85.0, 30.0), ("sabr", 90.0, 20.0), ("cev", 85.0, 30.0)):
        f = fold_double(coefficients(models[name]), Kd, Kp)
        x = rng.uniform(Kd - 10 * Kp, Kd + 10 * Kp, points)
        frac = np.mod((x - Kd) / Kp, 1.0)
        x = x[(frac > 1e-6) & (frac < 1 - 1e-6)]
        vv = rng.uniform(0.0, 2.0, x.size)
        for ev in (f.sigma11, f.mu1):
            for a, b in ((ev(x + 2 * Kp, vv), ev(x, vv)), (ev(2 * Kd - x, vv), -ev(x, vv))):
                ok, worst = _close(a, b)
                ok_all &= ok
                worst_all = max(worst_all, worst)
    out.append(Check("double-periodicity-antisymmetry", ok_all, f"max rel err {worst_all:.2e}"))

    Kd, Kp = 85.0, 30.0
    x = rng.uniform(Kd - 10 * Kp, Kd + 10 * Kp, points)
    _, mapped, _ = fold_points(Kd, Kp, x)
    ok = bool(np.all((mapped >= Kd) & (mapped < Kd + Kp)))
    out.append(Check("fold-range", ok, f"{points} points over 20 bands"))

    n_series = max(points // 10, 1)
    mismatches = 0
    for name in ("heston", "sabr", "bs"):
        base = coefficients(models[name])
        f = fold_double(base, Kd, Kp)
        x = rng.uniform(Kd - 99 * Kp, Kd + 99 * Kp, n_series)
        vv = rng.uniform(0.0, 2.0, n_series)
        for closed, ev in ((f.sigma11, base.sigma11), (f.mu1, base.mu1)):
            mismatches += int(np.count_nonzero(closed(x, vv) != image_series(ev, Kd, Kp, x, vv)))
    out.append(Check("fold-equals-image-series", mismatches == 0,
                     f"{mismatches} mismatches over {n_series} points x 3 models x 2 coefficients"))

    pay = call_payoff(95.0)
    x = rng.uniform(Kd, Kd + Kp, points)
    ok = np.array_equal(unfold_payoff_double(pay, Kd, Kp, x), pay(x))
    out.append(Check("unfold-identity-fundamental-band", bool(ok), f"{points} points"))

    x = rng.uniform(0.0, 2 * K, points)
    x = x[x != K]
    ok, worst = _close(reflect_payoff_single(pay, K, 2 * K - x), -reflect_payoff_single(pay, K, x))
    out.append(Check("reflected-payoff-antisymmetry", ok, f"max rel err {worst:.2e}"))
    return out


def _coupled_paths(paths: int, seed: int) -> Check:
    model = Model1D("bs", r=0.02, sigma=0.5)
    K = 90.0
    base = coefficients(model)
    sym = symmetrize_single_1d(base, K)
    grid = TimeGrid(1.0, 100)
    agree, crossed = 0, 0
    for i in range(paths):
        stream = PathStream(seed, i)
        a = simulate_path(base, model.x0, None, grid, stream)[:, 0]
        b = simulate_path(sym, model.x0, None, grid, stream)[:, 0]
        hit = np.flatnonzero(a <= K)
        stop = hit[0] + 1 if hit.size else a.size
        crossed += bool(hit.size)
        agree += bool(np.array_equal(a[:stop], b[:stop]))
    return Check("coupled-path-identity", agree == paths,
                 f"{agree}/{paths} paths identical up to first grid point <= K ({crossed} crossed)")


def _apcs(trials: int, seed: int) -> list[Check]:
    K = 90.0
    model = Model1D("bs", r=0.0, sigma=0.2, x0=K)
    sym = symmetrize_single_1d(coefficients(model), K)
    x = simulate_batch(sym, K, None, TimeGrid(1.0, 100), seed=seed, n_paths=trials).x
    u = x - K
    out = []
    for label, g in (("u+", lambda z: np.maximum(z, 0.0)), ("u^3", lambda z: z**3), ("sin", np.sin)):
        d = g(u) - g(-u)
        se = d.std(ddof=1) / math.sqrt(d.size)
        z = d.mean() / se if se > 0 else 0.0
        out.append(Check(f"apcs-moment-{label}", abs(z) < 3.0, f"stat {d.mean():.4g} = {z:+.2f} stderr"))
    return out


def _bachelier(trials: int, seed: int) -> Check:
    model = Model1D("abm", sigma=10.0)
    contract = BarrierContract(95.0, 90.0, 1.0)
    est = price_pcs(model, contract, McConfig(200, trials, seed))
    exact = bachelier_barrier_exact(100.0, 95.0, 90.0, 10.0, 1.0)
    z = (est.mean - exact) / est.stderr
    return Check("pcs-matches-bachelier", abs(z) < 3.0,
                 f"MC {est.mean:.5f} vs exact {exact:.5f} ({z:+.2f} stderr)")


def _norm_cdf_checks() -> list[Check]:
    z = np.linspace(-8.0, 8.0, 321)
    with mpmath.workdps(40):
        ref = np.array([float(mpmath.ncdf(mpmath.mpf(float(t)))) for t in z])
    got = norm_cdf(z)
    acc = float(np.max(np.abs(got - ref)))
    sym = float(np.max(np.abs(norm_cdf(-z) - (1.0 - norm_cdf(z)))))
    mono = bool(np.all(np.diff(norm_cdf(np.linspace(-10, 10, 20001))) >= 0))
    q = abs(norm_cdf(1.959963985) - 0.975)
    return [
        Check("norm-cdf-accuracy", acc <= 1e-12, f"max abs err {acc:.2e} on |z| <= 8"),
        Check("norm-cdf-symmetry", sym <= 1e-15 and norm_cdf(0.0) == 0.5, f"max |Phi(-z) - 1 + Phi(z)| {sym:.2e}"),
        Check("norm-cdf-monotone", mono, "nondecreasing on [-10, 10]"),
        Check("norm-cdf-quantile", q <= 1e-9, f"|Phi(1.959963985) - 0.975| = {q:.2e}"),
    ]


def _worker_invariance(seed: int) -> Check:
    model = SvModel("heston", r=0.02, kappa=1.0, theta=0.03, nu=0.03, rho=-0.7, v0=0.03)
    contract = BarrierContract(95.0, 90.0)
    results = {w: price_pathwise(model, contract, McConfig(20, 100_000, seed, workers=w)) for w in (1, 4, 8)}
    vals = {(r.mean, r.stderr) for r in results.values()}
    return Check("worker-count-invariance", len(vals) == 1, f"{len(vals)} distinct results over 1/4/8 workers")


def verify_properties(*, trials: int = 1_000_000, points: int = 100_000, paths: int = 1000,
                      seed: int = 20240601) -> list[Check]:
    """Run every self-check and return one result per property."""
    rng = np.random.default_rng(seed)
    checks = _coefficient_checks(rng, points)
    checks.append(_coupled_paths(paths, seed))
    checks.extend(_apcs(trials, seed + 1))
    checks.append(_bachelier(trials, seed + 2))
    checks.extend(_norm_cdf_checks())
    checks.append(_worker_invariance(seed + 3))
    return checks


def format_report(checks: list[Check]) -> str:
    lines = [c.line() for c in checks]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines)
