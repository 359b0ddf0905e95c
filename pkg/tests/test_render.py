import numpy as np
import pytest

from skewfatou.dynamics import SkewProduct, fiber_orbit
from skewfatou.expr import W, Z, Poly, parse_expr
from skewfatou.render import pgm_bytes, pixel_grid, read_pgm, render_slice, write_pgm

F = SkewProduct(Poly((0, 0, 1), Z), Poly((0, 0.5), W), Poly((1,), Z))


def _fiber_escape(z, maxiter, radius):
    orbit = fiber_orbit(F.f, z, maxiter)
    for k, v in enumerate(orbit):
        if not abs(v) <= radius:
            return k
    return maxiter if len(orbit) == maxiter + 1 else len(orbit)


def test_fiber_slice_matches_one_dimensional_picture():
    img = render_slice(F, (-2, -2, 2, 2), 0.0, (128, 128), maxiter=60, radius=1e3, threads=4)
    rng = np.random.default_rng(11)
    for _ in range(100):
        i, j = rng.integers(0, 128, 2)
        z = img.pixel_point(i, j)
        assert img.steps[i, j] == _fiber_escape(z, 60, 1e3)


def test_interior_viewport_all_maxiter():
    img = render_slice(F, (-0.3, -0.3, 0.3, 0.3), 0.0, (40, 30), maxiter=25)
    assert np.all(img.steps == 25) and np.all(img.gray() == 255)


def test_slices_nearly_agree_for_polynomial_h():
    a = render_slice(F, (-2, -2, 2, 2), 0.0, (200, 200), maxiter=50)
    b = render_slice(F, (-2, -2, 2, 2), 1e-9, (200, 200), maxiter=50)
    assert np.mean(a.steps != b.steps) < 1e-3


def test_pixel_mapping_affine():
    g = pixel_grid((-1, -2, 3, 2), 4, 2)
    assert g[0, 0] == complex(-0.5, 1.0) and g[1, 3] == complex(2.5, -1.0)


def test_deterministic_and_thread_independent(tmp_path):
    G = SkewProduct(parse_expr("z^2 - 0.75"), parse_expr("w/2", W), parse_expr("z^3"))
    a = render_slice(G, (-2, -1.5, 2, 1.5), 0.05, (97, 61), 80, threads=1)
    b = render_slice(G, (-2, -1.5, 2, 1.5), 0.05, (97, 61), 80, threads=8, band=3)
    assert np.array_equal(a.steps, b.steps)
    p = tmp_path / "image.pgm"
    write_pgm(a, p)
    data = p.read_bytes()
    assert data.startswith(b"P5\n97 61\n255\n") and data == pgm_bytes(b)
    assert np.array_equal(read_pgm(p), (a.steps * 255 // 80).astype(np.uint8))


def test_render_validation():
    with pytest.raises(ValueError):
        render_slice(F, (1, 0, 0, 1), 0.0, (4, 4))
    with pytest.raises(ValueError):
        render_slice(F, (0, 0, 1, 1), 0.0, (8193, 8192))
