"""Worked instances: the real polynomial map (z^2 - w z^3, lam*w) and Baker-type families.

The polynomial map preserves the real plane.  Starting on the positive real
axis at x0 > 1, a tiny positive y0 flips the sign of x at a computable step;
bisection in y then locates a boundary point whose orbit stays bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SkewProduct
from .expr import W, Z, Add, Const, Exp, Expr, Poly, Var, derivative, parse_expr


@dataclass(frozen=True)
class PolyExampleInstance:
    lam: float
    x0: float
    delta: float
    N: int
    n0: int
    y0: float

    def skew_product(self) -> SkewProduct:
        return polynomial_example_map(self.lam)


def polynomial_example_map(lam: float) -> SkewProduct:
    """(z^2 - w z^3, lam*w) written as f(z) + w*h(z) with h = -z^3."""
    return SkewProduct(
        f=Poly((0, 0, 1), Z),
        g=Poly((0, lam), W),
        h=Poly((0, 0, 0, -1), Z),
    )


def _first_threshold(lam: float, x0: float) -> int:
    # least n >= 1 with (lam^2 x0)^(2^(n-1)) > 1/(1 - lam)
    a = math.log(lam * lam * x0)
    target = -math.log1p(-lam)
    if a <= 0:
        raise ValueError("need lam^2 * x0 > 1")
    n = 1
    while (2.0 ** (n - 1)) * a <= target:
        n += 1
    return n


def _y0(lam: float, x0: float, n: int) -> float:
    """1 / ((lam x0)^(2^n) lam^(n-1)), exactly when representable."""
    with np.errstate(over="ignore"):
        denom = (lam * x0) ** (2 ** n) * lam ** (n - 1)
    if math.isfinite(denom) and denom > 0:
        return 1.0 / denom
    return math.exp(-((2 ** n) * math.log(lam * x0) + (n - 1) * math.log(lam)))


def example_thresholds(lam: float, x0: float, delta: float) -> PolyExampleInstance:
    """Thresholds N, n0 and the explicit sign-flipping height y0."""
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    if not x0 > 1:
        raise ValueError("x0 must exceed 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if lam * lam * x0 <= 1:
        raise ValueError("lam^2 * x0 must exceed 1")
    N = _first_threshold(lam, x0)
    n0 = N
    while _y0(lam, x0, n0) >= delta:
        n0 += 1
    return PolyExampleInstance(lam, x0, delta, N, n0, _y0(lam, x0, n0))


def real_orbit(lam: float, x: float, y: float, steps: int) -> list:
    """Orbit of the example map on real data, in plain floats."""
    out = [(x, y)]
    for _ in range(steps):
        x, y = x * x - y * (x * x * x), lam * y
        out.append((x, y))
    return out


@dataclass
class SignFlipReport:
    xs: list
    positive_until: int
    flip_value: float
    ok: bool


def example_sign_flip(inst: PolyExampleInstance) -> SignFlipReport:
    """Check x_k > 0 for k <= n0 and x_{n0+1} <= 0 by direct iteration."""
    orbit = real_orbit(inst.lam, inst.x0, inst.y0, inst.n0 + 1)
    xs = [p[0] for p in orbit]
    pos = all(x > 0 for x in xs[: inst.n0 + 1])
    return SignFlipReport(xs, inst.n0, xs[-1], pos and xs[-1] <= 0)


@dataclass
class BisectionReport:
    lower: float
    upper: float
    width: float
    steps: int
    y_tilde: float
    x_at_y_tilde: float
    fine_lower: float
    fine_upper: float
    fine_steps: int
    widths: list


def example_bisect_bounded(inst: PolyExampleInstance, tolerance: float = 1e-15) -> BisectionReport:
    """Bisect y in (0, y0] for the sign change of x_{n0+1}.

    The bracket is parametrized as y = y0 * t with dyadic t, so its width
    y0 * 2^-j halves exactly until it drops below ``tolerance``.  Because
    x_{n0+1} is extremely steep in y, the search then continues down to
    adjacent doubles; ``y_tilde`` is the end of that final bracket with the
    smaller |x_{n0+1}|.
    """
    n = inst.n0 + 1

    def xlast(y):
        return real_orbit(inst.lam, inst.x0, y, n)[-1][0]

    if not xlast(0.0) > 0 or not xlast(inst.y0) <= 0:
        raise ValueError("no sign change on (0, y0]")
    t_lo, t_hi = 0.0, 1.0
    j = 0
    widths = [inst.y0]
    while inst.y0 * 2.0 ** -j > tolerance:
        t_mid = t_lo + 2.0 ** -(j + 1)
        if xlast(inst.y0 * t_mid) > 0:
            t_lo = t_mid
        else:
            t_hi = t_mid
        j += 1
        widths.append(inst.y0 * 2.0 ** -j)
        if j > 1070:
            raise RuntimeError("bisection did not reach tolerance")
    lo, hi = inst.y0 * t_lo, inst.y0 * t_hi
    flo, fhi = lo, hi
    fine = 0
    while True:
        mid = 0.5 * (flo + fhi)
        if mid <= flo or mid >= fhi:
            break
        if xlast(mid) > 0:
            flo = mid
        else:
            fhi = mid
        fine += 1
    x_lo, x_hi = xlast(flo), xlast(fhi)
    y_t, x_t = (flo, x_lo) if abs(x_lo) <= abs(x_hi) else (fhi, x_hi)
    return BisectionReport(lo, hi, inst.y0 * 2.0 ** -j, j, y_t, x_t, flo, fhi, fine, widths)


# ---------------------------------------------------------------------------
# Baker-type families f(z) = z + p(z) + T with p T-periodic


@dataclass(frozen=True)
class BakerFamilyInstance:
    T: complex
    p: Expr
    z0: complex
    multiplier: float

    @property
    def b(self) -> Expr:
        return Add((Var(Z), self.p))

    @property
    def f(self) -> Expr:
        return Add((Var(Z), self.p, Const(self.T)))

    def center(self, k: int) -> complex:
        return self.z0 + k * self.T


DEFAULT_BAKER_PERIOD = 2j * math.pi
DEFAULT_BAKER_P = "exp(-z) - 1"


def make_baker_family(T: complex = DEFAULT_BAKER_PERIOD, p: Expr | str = DEFAULT_BAKER_P,
                      guess: complex = 0.0, periodicity_tol: float = 1e-9,
                      grid: int = 5) -> BakerFamilyInstance:
    """Validate a T-periodic p with an attracting fixed point of b = z + p."""
    if isinstance(p, str):
        p = parse_expr(p)
    if p.uses(W):
        raise ValueError("p must be a function of z only")
    T = complex(T)
    if T == 0:
        raise ValueError("period T must be nonzero")
    xs = np.linspace(-1.0, 1.0, grid)
    pts = (xs[:, None] + 1j * xs[None, :]).ravel()
    drift = np.max(np.abs(p(pts + T) - p(pts)))
    if not drift <= periodicity_tol:
        raise ValueError(f"p is not T-periodic on the test grid (max drift {drift:.3e})")
    dp = derivative(p, Z)
    z = complex(guess)
    # fixed-point iteration of b, then Newton on p(z) = 0
    for _ in range(200):
        z_new = complex(z + p(z))
        if not np.isfinite(z_new):
            break
        if abs(z_new - z) < 1e-15 * max(1.0, abs(z)):
            z = z_new
            break
        z = z_new
    for _ in range(50):
        d = complex(dp(z))
        if d == 0:
            break
        step = complex(p(z)) / d
        z -= step
        if abs(step) < 1e-16 * max(1.0, abs(z)):
            break
    if not np.isfinite(z) or abs(complex(p(z))) > 1e-10:
        raise ValueError("no fixed point of b found near the guess")
    mult = abs(1 + complex(dp(z)))
    if not mult < 1:
        raise ValueError(f"fixed point {z} of b is not attracting (|b'| = {mult:.3g})")
    return BakerFamilyInstance(T, p, z, mult)
