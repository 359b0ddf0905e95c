import math

import numpy as np
import pytest

from skewfatou.criteria import RhoSequence, series_test
from skewfatou.dynamics import SkewProduct
from skewfatou.expr import W, Z, Exp, Poly, Var, parse_expr
from skewfatou.gallery import make_baker_family
from skewfatou.probe import (INCONCLUSIVE, MIXED, UNIFORM, bulging_grid, bulging_probe, bulging_text,
                             certificate_orbits, certificate_text, certify_non_normality, reverify_certificate)

F_STD = SkewProduct(Poly((0, 0, 1), Z), Poly((0, 0.5), W), Poly((1,), Z))


def test_fatou_point_inconclusive():
    cert = certify_non_normality(F_STD, 0.5, [0.1, 0.05], 50)
    assert not cert.complete and cert.verdict == "inconclusive at scale 0.1"
    assert all(r.escape is None and r.bounded is not None for r in cert.results)


def test_julia_point_complete_and_reverifies():
    cert = certify_non_normality(F_STD, 1.0, [0.1, 0.05, 0.025], 50, threads=3)
    assert cert.complete and cert.verdict == "complete"
    assert reverify_certificate(cert, F_STD)
    assert all(b > a for a, b in zip(cert.ladder, cert.ladder[1:]))
    for r, E in zip(cert.results, cert.ladder):
        assert abs(r.escape.w) <= r.r and abs(r.bounded.w) <= r.r
        assert r.escape.attained >= E
        assert r.bounded.max_norm <= cert.bound and r.bounded.horizon == cert.horizon
    text = certificate_text(cert)
    files = certificate_orbits(cert)
    for name in files:
        assert name in text
    assert certify_non_normality(F_STD, 1.0, [0.1, 0.05, 0.025], 50).results[0].escape.w == \
        cert.results[0].escape.w


def test_scale_validation():
    with pytest.raises(ValueError):
        certify_non_normality(F_STD, 1.0, [], 10)
    with pytest.raises(ValueError):
        certify_non_normality(F_STD, 1.0, [0.1, 0.2], 10)
    with pytest.raises(ValueError):
        certify_non_normality(F_STD, 1.0, [0.1, 0.05], 10, e_ladder=[10, 5])


def test_constructed_witnesses_admissible(demo_run):
    st = demo_run.stages[1]
    F = SkewProduct(demo_run.f, demo_run.g, demo_run.assembled.h)
    cert = certify_non_normality(F, 2.0, [1.0], 40, candidates=[st.w, st.w_tilde])
    r = cert.results[0]
    assert r.complete
    assert r.escape.w == st.w and r.bounded.w == st.w_tilde


def _baker(h):
    b = make_baker_family()
    return b, SkewProduct(b.f, parse_expr("w/2", W), parse_expr(h))


def test_bulging_uniform_default():
    b, F = _baker("1")
    rep = bulging_probe(F, b, 0.1, 0.2, 0.01, 0.5, 50)
    assert len(rep.samples) == 25 and rep.verdict == UNIFORM
    for s in rep.samples:
        assert abs(s.z - 0.1) < 0.2 and abs(s.w) < 0.01
    assert "verdict = uniform-shadowing" in bulging_text(rep)


def test_bulging_unperturbed_uniform():
    b, F = _baker("0")
    assert bulging_probe(F, b).verdict == UNIFORM


def test_bulging_not_uniform_for_growing_h():
    b, F = _baker("exp(-i*z)")
    rep = bulging_probe(F, b)
    assert rep.verdict in (MIXED, INCONCLUSIVE)
    assert any(s.left_tube for s in rep.samples)


def test_exp_z_is_bounded_along_imaginary_translates():
    # |e^z| only depends on Re z, so the translates kT with T = 2 pi i see a bounded h
    rho = RhoSequence.geometric(0.01, 0.5, 60)
    assert series_test(Exp(Var(Z)), rho, 0.0, 2j * math.pi, 0.5).verdict == "converged"


def test_mixed_verdict_when_some_start_leaves():
    b, F = _baker("exp(-i*z)")
    starts = [(0.1, 0.0), (0.1, 0.009)]
    rep = bulging_probe(F, b, starts=starts)
    assert rep.samples[0].shadows and rep.samples[1].left_tube
    assert rep.verdict == MIXED


def test_grid_geometry():
    pts = bulging_grid(0.1, 0.2, 0.01, 5)
    assert len(pts) == 25
    assert max(abs(z - 0.1) for z, _ in pts) <= 0.7 * 0.2 + 1e-15
