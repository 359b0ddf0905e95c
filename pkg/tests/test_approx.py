import numpy as np
import pytest

from skewfatou.approx import (AffineMap, ApproximationProblem, Disk, Piece, PowerMap, SingularFitError,
                              certify_sup_error, fit_piecewise, interior_errors)


def _const(c):
    return lambda z: np.full_like(z, c)


def test_exact_quadratic_recovered():
    prob = ApproximationProblem([Piece(Disk(0, 1), lambda z: z * z, 1e-10)])
    fit = fit_piecewise(prob, 10)
    assert fit.ok and fit.basis_degree == 2 and fit.degree == 2
    cert = certify_sup_error(fit, prob)
    assert np.all(cert.errors <= 1e-12)
    assert np.allclose(fit.poly.z_coefficients(), [0, 0, 1], atol=1e-12)


def test_two_disks_constants():
    prob = ApproximationProblem([Piece(Disk(0, 1), _const(0.0), 1e-3), Piece(Disk(5, 1), _const(1.0), 1e-3)])
    fit = fit_piecewise(prob, 200)
    assert fit.ok and np.all(fit.achieved < 1e-3)
    cert = certify_sup_error(fit, prob)
    assert cert.samples_per_disk == 4 * 4096
    assert np.all(cert.raw_max < 1e-3)
    assert np.all(cert.errors >= fit.achieved / 1.05)


def test_overlapping_disks_rejected():
    with pytest.raises(ValueError):
        ApproximationProblem([Piece(Disk(0, 1), _const(0.0), 1e-3), Piece(Disk(1.5, 1), _const(1.0), 1e-3)])


def test_failure_flags_not_silent():
    prob = ApproximationProblem([Piece(Disk(0, 1), _const(0.0), 1e-12), Piece(Disk(2.2, 1), _const(1.0), 1e-12)])
    fit = fit_piecewise(prob, 15)
    assert not fit.ok and not np.all(fit.success)


def test_monotone_in_max_degree():
    prob = ApproximationProblem([Piece(Disk(0, 1), _const(0.0), 1e-14), Piece(Disk(3, 0.5), _const(1.0), 1e-14)])
    ratios = [fit_piecewise(prob, m).worst_ratio for m in (2, 5, 10, 20, 40)]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))


def test_reproducible_bitwise():
    prob = ApproximationProblem([Piece(Disk(0, 1), np.exp, 1e-9), Piece(Disk(4j, 1), _const(2.0), 1e-9)])
    a, b = fit_piecewise(prob, 80), fit_piecewise(prob, 80)
    assert np.array_equal(a.poly.coeffs, b.poly.coeffs) and np.array_equal(a.poly.H, b.poly.H)


def _random_problem(rng):
    while True:
        c = rng.uniform(-3, 3, 2) + 1j * rng.uniform(-3, 3, 2)
        r = rng.uniform(0.2, 1.0, 2)
        if abs(c[0] - c[1]) - r.sum() > 0.2:
            break
    targets = []
    for _ in range(2):
        kind = rng.integers(0, 3)
        a = complex(*rng.uniform(-1, 1, 2))
        if kind == 0:
            targets.append(_const(a))
        elif kind == 1:
            targets.append(lambda z, a=a: np.exp(a * z))
        else:
            targets.append(lambda z, a=a: a * z ** 3 - z)
    return ApproximationProblem([Piece(Disk(c[i], r[i]), targets[i], 1e-6) for i in range(2)])


def test_maximum_modulus_interior_50_problems():
    rng = np.random.default_rng(2024)
    for t in range(50):
        prob = _random_problem(rng)
        fit = fit_piecewise(prob, 60)
        cert = certify_sup_error(fit, prob)
        inner = interior_errors(fit, prob, 1000, seed=t)
        assert np.all(inner <= cert.errors), (t, inner, cert.errors)


def test_power_premap_separates_small_disk():
    # the stage-1 shape: big disk at the origin, two small disks just outside it
    H = Disk(0, 3.8875)
    D1, D2 = Disk(4.03125, 0.0186), Disk(3.96875, 0.0186)
    prob = ApproximationProblem([Piece(H, _const(0.0), 0.0128), Piece(D1, _const(1.0), 0.0128),
                                 Piece(D2, _const(-1.0), 0.0128)])
    pm = PowerMap(0.0, 4.0, 135)
    fit = fit_piecewise(prob, 400, premap=pm)
    assert fit.ok and fit.degree == 135 * fit.basis_degree


def test_premaps():
    assert AffineMap(1.0, 2.0)(3.0) == 1.0
    z = np.array([1.5 + 0.5j, -0.3j])
    assert np.allclose(PowerMap(0.5, 2.0, 7)(z), ((z - 0.5) / 2.0) ** 7, rtol=1e-14)


def test_log_abs_matches_value():
    prob = ApproximationProblem([Piece(Disk(0, 1), np.exp, 1e-10)])
    fit = fit_piecewise(prob, 40)
    z = np.array([0.3, 2.0 + 1j, 10.0])
    assert np.allclose(fit.poly.log_abs(z), np.log(np.abs(fit(z))), rtol=1e-10)


def test_singular_input_reports_diagnostics():
    # all samples identical in the premapped variable: the basis breaks down at once
    prob = ApproximationProblem([Piece(Disk(0, 1), np.exp, 1e-14)])
    with pytest.raises(SingularFitError) as info:
        fit_piecewise(prob, 5, premap=lambda z: np.zeros_like(z))
    assert "subdiagonal" in info.value.diagnostics
