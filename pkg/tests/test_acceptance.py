"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line in the terminal summary."""

import math
import time

import numpy as np

from conftest import record_criterion
from skewfatou.approx import ApproximationProblem, Disk, Piece, certify_sup_error, fit_piecewise, interior_errors
from skewfatou.construction import run_construction
from skewfatou.criteria import RhoSequence, derive_rho_geometric, derive_rho_superattracting, estimate_order, \
    series_test, shadowing_check
from skewfatou.dynamics import SkewProduct, fiber_orbit, iterate, select_escaping_subsequence
from skewfatou.expr import W, Z, Exp, Poly, Var, parse_expr
from skewfatou.gallery import (example_bisect_bounded, example_sign_flip, example_thresholds, make_baker_family,
                               polynomial_example_map, real_orbit)
from skewfatou.probe import UNIFORM, bulging_probe


def _gate(n, checks, elapsed=None, limit=None):
    if limit is not None:
        checks.append((f"runtime {elapsed:.2f}s < {limit}s", elapsed < limit))
    failed = [name for name, ok in checks if not ok]
    detail = "; ".join(name for name, _ in checks) if not failed else "failed: " + "; ".join(failed)
    record_criterion(n, not failed, detail)
    assert not failed, failed


def test_criterion_1_polynomial_example():
    t = time.perf_counter()
    inst = example_thresholds(0.5, 5.0, 0.01)
    flip = example_sign_flip(inst)
    bis = example_bisect_bounded(inst, 1e-15)
    rec = iterate(polynomial_example_map(0.5), (5.0, bis.y_tilde), 200)
    x_esc = real_orbit(0.5, 5.0, bis.y_tilde + 1e-14, 4)[-1][0]
    elapsed = time.perf_counter() - t
    _gate(1, [
        (f"N={inst.N}", inst.N == 3),
        (f"n0={inst.n0}", inst.n0 == 3),
        (f"y0={inst.y0!r}", abs(inst.y0 - 0.00262144) <= 1e-15 * 0.00262144),
        ("x1..x3 > 0 and x4 <= 0", all(x > 0 for x in flip.xs[1:4]) and flip.xs[4] <= 0),
        (f"bracket width {bis.width:.3g} <= 1e-15", bis.width <= 1e-15),
        (f"y~0={bis.y_tilde!r} in (0, y0)", 0 < bis.y_tilde < inst.y0),
        ("y~0 orbit bounded by 5^8 over 200 steps",
         rec.last_step == 200 and float(np.max(np.abs(rec.z))) <= 5.0 ** 8),
        (f"x4 at y~0+1e-14 = {x_esc:.4g} <= 0", x_esc <= 0),
    ], elapsed, 1.0)


def test_criterion_2_order_estimation():
    t = time.perf_counter()
    rng = np.random.default_rng(0)
    polys = [Poly(tuple(rng.standard_normal(d + 1) + 1j * rng.standard_normal(d + 1)), Z) for d in range(11)]
    pe = [estimate_order(p) for p in polys]
    e1 = estimate_order(Exp(Var(Z)))
    e2 = estimate_order(parse_expr("exp(z^2)"))
    elapsed = time.perf_counter() - t
    finite = all(np.all(np.isfinite(e.log_M)) for e in pe + [e1, e2])
    _gate(2, [
        (f"polynomials deg<=10 max estimate {max(e.estimate for e in pe):.3f} <= 0.15",
         max(e.estimate for e in pe) <= 0.15),
        (f"exp(z) {e1.estimate:.3f} in [0.9,1.1]", 0.9 <= e1.estimate <= 1.1),
        (f"exp(z^2) {e2.estimate:.3f} in [1.85,2.15]", 1.85 <= e2.estimate <= 2.15),
        ("ladder 2^6..2^14 without overflow", finite and e2.ladder[0] == 64 and e2.ladder[-1] == 2 ** 14),
    ], elapsed, 5.0)


def test_criterion_3_series_criterion():
    rho = RhoSequence.geometric(0.1, 0.5, 60)
    a = series_test(Poly((1,), Z), rho, K=60)
    b = series_test(Exp(Var(Z)), rho, 0.0, 1.0, 0.5, K=60)
    err = abs(a.partial_sums[-1] - 0.2)
    _gate(3, [
        (f"h=1 partial sum error {err:.2g} <= 1e-9", err <= 1e-9),
        (f"h=1 verdict {a.verdict}", a.verdict == "converged"),
        (f"h=exp(z), T=1 verdict {b.verdict}", b.verdict == "diverging"),
    ])


def test_criterion_4_baker_shadowing():
    t = time.perf_counter()
    baker = make_baker_family()
    F = SkewProduct(baker.f, Poly((0, 0.5), W), Poly((1,), Z))
    rep = shadowing_check(F, baker, 0.1, 0.01, 0.5, 50)
    ks = np.arange(51)
    e = np.abs(rep.errors)
    induction = all(e[k + 1] <= e[k] + rep.step_bounds[k] + 1e-12 for k in range(50))
    probe = bulging_probe(F, baker, 0.1, 0.2, 0.01, 0.5, 50)
    elapsed = time.perf_counter() - t
    _gate(4, [
        (f"max e_k = {e.max():.3g} < 0.5 for k <= 50", len(e) == 51 and bool(np.all(e < 0.5))),
        ("e_{k+1} <= e_k + rho_k max|h| at every step", induction and rep.induction_ok),
        (f"|w_50| = {rep.w_abs[-1]:.3g} < 1e-16", rep.w_abs[-1] < 1e-16),
        (f"bulging_probe over {len(probe.samples)} points: {probe.verdict}",
         len(probe.samples) == 25 and probe.verdict == UNIFORM),
        ("centres are z0 + 2 pi i k", np.allclose(baker.center(50), 100j * math.pi) and ks[-1] == 50),
    ], elapsed, 1.0)


def test_criterion_5_runge_construction():
    t = time.perf_counter()
    run = run_construction(Poly((0, 0, 1), Z), Poly((0, 0.5), W), 2.0, K=2, max_degree=1500)
    elapsed = time.perf_counter() - t
    geo = run.geometry
    s0, s1 = run.stages[0], run.stages[1]
    later = run.stages[2:]
    honest = all(st.passed or (not st.complete and st.message) or
                 (st.complete and any(not c.passed for c in st.checks)) for st in later)
    dich = {r.k: r for r in run.dichotomy}
    r1 = dich.get(1)
    stage2 = later[0].status + (f" ({later[0].message})" if later and later[0].message else "") if later else "none"
    _gate(5, [
        (f"delta~ = {geo.delta_tilde}", geo.delta_tilde[:3] == [0.25, 0.0625, 0.015625]),
        ("geometry invariants with positive margins", all(c.passed and c.margin > 0 for c in geo.checks)),
        ("stage 0 complete", s0.passed),
        (f"stage 1 complete, {len(s1.checks)} property checks pass" +
         (f", fit degree {s1.fit.degree}" if s1.fit else ""), s1.passed),
        (f"later stages flagged honestly: stage 2 {stage2}", honest),
        (f"|z_(n1+1)(w1) - 2| = {abs(r1.escape_value - 2):.3g} < 1" if r1 else "dichotomy row 1 present",
         r1 is not None and abs(r1.escape_value - 2) < 1),
        (f"|z_(n1+1)(w~1)| = {abs(r1.bounded_value):.3g} < 1" if r1 else "dichotomy row 1 present",
         r1 is not None and abs(r1.bounded_value) < 1),
        ("assembled h bounds", run.assembled is not None and run.assembled.passed),
    ], elapsed, 600.0)


def test_criterion_6_approximation_engine():
    prob = ApproximationProblem([Piece(Disk(0, 1), lambda z: z * z, 1e-10)])
    fit = fit_piecewise(prob, 10)
    exact = float(certify_sup_error(fit, prob).errors.max())
    rng = np.random.default_rng(6)
    worst = -np.inf
    ok = True
    for t in range(50):
        while True:
            c = rng.uniform(-3, 3, 2) + 1j * rng.uniform(-3, 3, 2)
            r = rng.uniform(0.2, 1.0, 2)
            if abs(c[0] - c[1]) - r.sum() > 0.2:
                break
        a = rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)
        p = ApproximationProblem([Piece(Disk(c[0], r[0]), lambda z, a=a[0]: np.exp(a * z), 1e-6),
                                  Piece(Disk(c[1], r[1]), lambda z, a=a[1]: np.full_like(z, a), 1e-6)])
        f = fit_piecewise(p, 60)
        cert = certify_sup_error(f, p)
        inner = interior_errors(f, p, 1000, seed=t)
        ok &= bool(np.all(inner <= cert.errors))
        worst = max(worst, float(np.max(inner / cert.errors)))
    _gate(6, [
        (f"exact quadratic certified error {exact:.2g} <= 1e-12", exact <= 1e-12),
        (f"50 two-disk problems: max interior/certified = {worst:.3f} <= 1", ok),
    ])


def test_criterion_7_invariant_suites():
    rng = np.random.default_rng(77)

    def cplx(n):
        return tuple(rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n))

    fiber_ok = True
    determinism_ok = True
    for i in range(10_000):
        F = SkewProduct(Poly(cplx(rng.integers(1, 5)), Z), Poly((0,) + cplx(rng.integers(1, 4)), W),
                        Poly(cplx(rng.integers(1, 5)), Z))
        z = complex(*rng.uniform(-1, 1, 2))
        rec = iterate(F, (z, 0.0), 20)
        fiber_ok &= bool(np.all(rec.w == 0)) and np.array_equal(rec.z, np.array(fiber_orbit(F.f, z, 20)[:len(rec.z)]))
        if i < 500:
            s = (z, complex(*rng.uniform(-0.5, 0.5, 2)))
            a, b = iterate(F, s, 40), iterate(F, s, 40)
            determinism_ok &= np.array_equal(a.z, b.z) and np.array_equal(a.w, b.w)
    real_ok = True
    for _ in range(500):
        lam = rng.uniform(0.05, 0.95)
        rec = iterate(polynomial_example_map(lam), (rng.uniform(-3, 3), rng.uniform(-0.1, 0.1)), 30)
        real_ok &= bool(np.all(rec.z.imag == 0) and np.all(rec.w.imag == 0))
    contain = 0
    for g in (parse_expr("w/2", W), parse_expr("w/2 + w^2", W), parse_expr("0.9*w - 0.3*w^3", W)):
        contain += derive_rho_geometric(g, 0.1, K=40).containment_checked
    for g in (parse_expr("w^2", W), parse_expr("w^3/2", W), parse_expr("w^2 + w^3", W)):
        contain += derive_rho_superattracting(g, 0.5, K=6).containment_checked
    sub_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        mods = list(rng.integers(0, 8, n).astype(float))
        got = select_escaping_subsequence(mods).indices
        brute = [0] + [m for m in range(1, n) if all(mods[m] > mods[j] for j in range(m))]
        sub_ok &= got == brute
    _gate(7, [
        ("fiber invariance on 10^4 random maps", fiber_ok),
        ("bit-identical re-runs", determinism_ok),
        ("example map stays real", real_ok),
        (f"rho forward containment ({contain} radii sampled)", contain > 0),
        ("escaping subsequence brute-force on 10^3 orbits", sub_ok),
    ])
