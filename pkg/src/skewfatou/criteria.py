"""Bulging tests: the weighted series along a translated orbit, shadowing, and order of growth.

All disk maxima are boundary-sampled.  By the maximum-modulus principle a
holomorphic function on a closed disk (or bidisk) peaks on the boundary
(distinguished boundary), so a dense boundary sample is a sharp estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SkewProduct, iterate
from .expr import W, Z, Expr, LogModulusError, derivative
from .gallery import BakerFamilyInstance

CONTAINMENT_SLACK = 1e-12
RATIO_WINDOW = 10
CONVERGENCE_RATIO = 0.9


def _circle(n: int, offset: float = 0.0) -> np.ndarray:
    return np.exp(2j * np.pi * (np.arange(n) + offset) / n)


def _log_abs(h, z, w=None):
    """log|h| on arrays, overflow-safe for expression trees."""
    if isinstance(h, Expr):
        return np.asarray(h.log_abs(z, w), dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.log(np.abs(np.asarray(h(z, w))))


def bidisk_log_max(h, zc: complex, delta: float, log_rho: float,
                   nz: int = 512, nw: int = 16) -> float:
    """log of the sampled max of |h| over {|z - zc| <= delta} x {|w| <= rho}."""
    zs = zc + delta * _circle(nz)
    uses_w = isinstance(h, Expr) and h.uses(W)
    if not uses_w:
        return float(np.max(_log_abs(h, zs)))
    rho = math.exp(log_rho)
    ws = rho * _circle(nw, 0.5)
    Zg = np.repeat(zs, nw)
    Wg = np.tile(ws, nz)
    return float(np.max(_log_abs(h, Zg, Wg)))


# ---------------------------------------------------------------------------
# radius sequences


@dataclass
class RhoSequence:
    """Radii rho_0 > rho_1 > ... stored as logs, so fast decay never underflows."""

    log_values: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    containment_checked: int = 0

    @property
    def K(self) -> int:
        return len(self.log_values) - 1

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    def __getitem__(self, k):
        return float(np.exp(self.log_values[k]))

    @classmethod
    def from_values(cls, values, kind="user", **params):
        v = np.asarray(values, dtype=float)
        if np.any(v <= 0):
            raise ValueError("rho values must be positive")
        return cls(np.log(v), kind, params)

    @classmethod
    def geometric(cls, rho0: float, ratio: float, K: int, kind="user"):
        k = np.arange(K + 1)
        return cls(math.log(rho0) + k * math.log(ratio), kind, {"rho0": rho0, "ratio": ratio})


def check_containment(g: Expr, rho: RhoSequence, samples: int = 256,
                      slack: float = CONTAINMENT_SLACK) -> int:
    """Verify |g(w)| <= rho_{k+1} on |w| = rho_k; returns the number of k checked.

    Radii below the normal double range are skipped (and not counted).
    """
    u = _circle(samples)
    checked = 0
    for k in range(rho.K):
        r, r_next = rho[k], rho[k + 1]
        if r < 1e-300 or r_next < 1e-300:
            continue
        gmax = float(np.max(np.abs(g(0.0, r * u))))
        if gmax > r_next * (1 + slack):
            raise ValueError(f"containment fails at k={k}: max|g| = {gmax!r} > rho_{k+1} = {r_next!r}")
        checked += 1
    return checked


def _g_derivs_at_zero(g: Expr, dmax: int = 12):
    vals, e = [], g
    for _ in range(dmax + 1):
        vals.append(complex(e(0.0, 0.0)))
        e = derivative(e, W)
    return vals


def derive_rho_geometric(g: Expr, probe_radius: float = 0.1, K: int = 60,
                         samples: int = 1024) -> RhoSequence:
    """rho_k = alpha^k delta_g with |g(w)| <= alpha |w| on the closed disk of radius delta_g."""
    d = _g_derivs_at_zero(g, 1)
    if abs(d[0]) > 1e-12:
        raise ValueError("g(0) != 0")
    a = abs(d[1])
    if not a < 1:
        raise ValueError(f"not geometrically attracting: |g'(0)| = {a:.6g}")
    if a == 0:
        raise ValueError("g'(0) = 0: superattracting, use derive_rho_superattracting")
    u = _circle(samples)
    delta = float(probe_radius)
    for _ in range(200):
        # g(w)/w is holomorphic on the disk, so its max sits on |w| = delta
        alpha = float(np.max(np.abs(g(0.0, delta * u)))) / delta
        if alpha < 1:
            break
        delta *= 0.5
    else:
        raise ValueError("no contracting disk found")
    alpha = max(alpha, a)
    rho = RhoSequence(math.log(delta) + np.arange(K + 1) * math.log(alpha), "geometric",
                      {"alpha": alpha, "delta_g": delta, "g_prime_0": a})
    rho.containment_checked = check_containment(g, rho)
    return rho


def derive_rho_superattracting(g: Expr, probe_radius: float = 0.5, t: float | None = None,
                               K: int = 60, samples: int = 1024, dmax: int = 12) -> RhoSequence:
    """rho_0 = t, rho_k = C_g rho_{k-1}^d for a superattracting fixed point of local degree d."""
    ders = _g_derivs_at_zero(g, dmax)
    scale = max(1.0, max(abs(v) for v in ders))
    if abs(ders[0]) > 1e-12 * scale:
        raise ValueError("g(0) != 0")
    d = next((j for j in range(1, dmax + 1) if abs(ders[j]) > 1e-12 * scale), None)
    if d is None:
        raise ValueError("local degree of g at 0 not detectable")
    if d < 2:
        raise ValueError("g'(0) != 0: not superattracting")
    u = _circle(samples)
    delta = float(probe_radius)
    for _ in range(200):
        gv = np.abs(g(0.0, delta * u))
        C = float(np.max(gv)) / delta ** d
        if delta ** d * C <= delta and float(np.max(gv)) <= delta:
            break
        delta *= 0.5
    else:
        raise ValueError("no normalizing radius found")
    if t is None:
        t = min(0.1, 0.5 * delta)
    if not 0 < t < delta:
        raise ValueError(f"need 0 < t < delta_g = {delta!r}")
    logs = [math.log(t)]
    for _ in range(K):
        logs.append(math.log(C) + d * logs[-1])
    logs = np.array(logs)
    # closed form: rho_k = C^((1-d^k)/(1-d)) t^(d^k)
    k = np.arange(K + 1)
    dk = np.power(float(d), k)
    closed = (1 - dk) / (1 - d) * math.log(C) + dk * math.log(t)
    if not np.allclose(logs, closed, rtol=1e-10, atol=0):
        raise ArithmeticError("recurrence and closed form disagree")
    D = math.log(C) / (1 - d)
    rho = RhoSequence(logs, "superattracting", {"C_g": C, "d": d, "t": t, "D": D, "delta_g": delta})
    rho.containment_checked = check_containment(g, rho)
    return rho


# ---------------------------------------------------------------------------
# series test


@dataclass
class CriterionReport:
    terms: np.ndarray
    partial_sums: np.ndarray
    ratios: np.ndarray
    verdict: str
    limit_estimate: float | None
    constants: dict
    overflow: bool = False

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


def _verdict(log_terms: np.ndarray):
    lt = log_terms
    if np.all(lt == -np.inf):
        return "converged", np.zeros(0)
    with np.errstate(invalid="ignore"):
        log_ratios = lt[1:] - lt[:-1]
    last = log_ratios[-RATIO_WINDOW:]
    if len(last) < RATIO_WINDOW:
        return "inconclusive", np.exp(log_ratios)
    if np.all(last < math.log(CONVERGENCE_RATIO)) or np.all(lt[-RATIO_WINDOW - 1:] == -np.inf):
        return "converged", np.exp(log_ratios)
    if np.all(last >= 0):
        return "diverging", np.exp(log_ratios)
    return "inconclusive", np.exp(log_ratios)


def series_test(h, rho: RhoSequence, z0: complex = 0.0, T: complex = 1.0, delta: float = 0.5,
                K: int | None = None, nz: int = 512) -> CriterionReport:
    """Sum rho_k * max|h| over the bidisks centred at (z0 + kT, 0), k = 0..K."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    K = rho.K if K is None else K
    if K > rho.K:
        raise ValueError("rho sequence shorter than K")
    log_terms = np.empty(K + 1)
    overflow = False
    for k in range(K + 1):
        try:
            lm = bidisk_log_max(h, z0 + k * T, delta, rho.log_values[k], nz=nz)
        except LogModulusError:
            lm = math.inf
        if not np.isfinite(lm) and lm != -math.inf:
            overflow = True
        log_terms[k] = rho.log_values[k] + lm
    constants = {"z0": complex(z0), "T": complex(T), "delta": delta, "K": K,
                 "rho_kind": rho.kind, **rho.params}
    with np.errstate(over="ignore"):
        terms = np.exp(log_terms)
    sums = np.cumsum(terms)
    if overflow or not np.all(np.isfinite(log_terms[log_terms != -np.inf])):
        with np.errstate(invalid="ignore"):
            ratios = np.exp(log_terms[1:] - log_terms[:-1])
        return CriterionReport(terms, sums, ratios, "inconclusive", None, constants, overflow=True)
    verdict, ratios = _verdict(log_terms)
    limit = None
    if verdict == "converged":
        tail = ratios[-RATIO_WINDOW:]
        r = float(np.max(tail)) if len(tail) and np.all(np.isfinite(tail)) else 0.0
        limit = float(sums[-1] + terms[-1] * r / (1 - r))
    return CriterionReport(terms, sums, ratios, verdict, limit, constants)


# ---------------------------------------------------------------------------
# order of growth


DEFAULT_LADDER = tuple(2.0 ** j for j in range(6, 15))


@dataclass
class OrderEstimate:
    estimate: float
    ladder: np.ndarray
    r2: float
    log_M: np.ndarray
    loglog_M: np.ndarray
    fit_from: int
    degenerate: bool = False
    diagonal: bool = False


def log_max_modulus(h, r: float, r2: float = 1.0, nz: int = 2048, nw: int = 16) -> float:
    """log M(r, r2; h): sampled max of log|h| on the torus |z| = r, |w| = r2."""
    zs = r * _circle(nz)
    if isinstance(h, Expr) and h.uses(W):
        ws = r2 * _circle(nw, 0.5)
        return float(np.max(_log_abs(h, np.repeat(zs, nw), np.tile(ws, nz))))
    return float(np.max(_log_abs(h, zs)))


def _log_plus(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    big = x > 1
    out[big] = np.log(x[big])
    return out


def estimate_order(h, r2: float = 1.0, ladder=DEFAULT_LADDER, diagonal: bool = False,
                   nz: int = 2048) -> OrderEstimate:
    """Regression slope of log+ log M(r, r2) against log r over the top half of the ladder."""
    lad = np.asarray(ladder, dtype=float)
    if len(lad) < 2 or np.any(np.diff(lad) <= 0):
        raise ValueError("ladder must be strictly increasing with at least two radii")
    logM = np.array([log_max_modulus(h, r, r if diagonal else r2, nz=nz) for r in lad])
    start = len(lad) // 2
    if np.all(logM == -np.inf):
        return OrderEstimate(0.0, lad, r2, logM, np.zeros_like(logM), start, degenerate=True,
                             diagonal=diagonal)
    ll = _log_plus(logM)
    x, y = np.log(lad[start:]), ll[start:]
    slope = float(np.polyfit(x, y, 1)[0])
    return OrderEstimate(max(slope, 0.0), lad, r2, logM, ll, start, diagonal=diagonal)


ORDER_BAND = 0.1


@dataclass
class GrowthVerdict:
    regime: str
    order: OrderEstimate
    verdict: str
    series: CriterionReport | None = None
    rho: RhoSequence | None = None


def growth_corollary_check(h, g: Expr, probe_radius: float = 0.1, z0: complex = 0.0,
                           T: complex = 2j * math.pi, delta: float = 0.5, K: int = 60,
                           band: float = ORDER_BAND) -> GrowthVerdict:
    """Sufficient growth conditions for bulging at an attracting fixed point of g."""
    ders = _g_derivs_at_zero(g, 1)
    if abs(ders[0]) > 1e-12:
        raise ValueError("g(0) != 0")
    a = abs(ders[1])
    order = estimate_order(h)
    if a >= 1:
        return GrowthVerdict("not-attracting", order, "not applicable")
    est = order.estimate
    if a > 1e-12:
        regime = "geometric"
        if est + band < 1:
            verdict = "criterion satisfied"
        elif est - band >= 1:
            verdict = "criterion not satisfied"
        else:
            verdict = "inconclusive near threshold"
    else:
        regime = "superattracting"
        verdict = "criterion satisfied" if np.isfinite(est) else "criterion not satisfied"
    out = GrowthVerdict(regime, order, verdict)
    if verdict == "criterion satisfied":
        if regime == "geometric":
            rho = derive_rho_geometric(g, probe_radius, K=K)
        else:
            rho = derive_rho_superattracting(g, probe_radius, K=K)
        out.rho = rho
        out.series = series_test(h, rho, z0, T, delta, K)
    return out


# ---------------------------------------------------------------------------
# shadowing along the translated orbit


@dataclass
class ShadowingReport:
    l: int
    errors: np.ndarray
    bounds: np.ndarray
    step_bounds: np.ndarray
    w_abs: np.ndarray
    rho: RhoSequence
    tube_ok: bool
    induction_ok: bool
    bound_ok: bool
    w_to_zero: bool
    left_tube_at: int | None

    @property
    def shadows(self) -> bool:
        return self.tube_ok and self.w_to_zero


def _nearest_translate(baker: BakerFamilyInstance, z: complex) -> int:
    T = baker.T
    s = ((complex(z) - baker.z0) / T).real
    return max(0, int(round(s)))


def default_shadow_rho(g: Expr, w_radius: float, K: int) -> RhoSequence:
    ders = _g_derivs_at_zero(g, 1)
    if abs(ders[1]) > 1e-12:
        return derive_rho_geometric(g, w_radius, K=K)
    return derive_rho_superattracting(g, 2 * w_radius, t=w_radius * (1 - 1e-12), K=K)


def shadowing_check(F: SkewProduct, baker: BakerFamilyInstance, z_start: complex, w_start: complex,
                    delta: float = 0.5, steps: int = 50, rho: RhoSequence | None = None,
                    nz: int = 256, slack: float = 1e-12) -> ShadowingReport:
    """Iterate F and compare z_k with the translated centres z0 + (l + k)T.

    ``rho`` is indexed from the starting translate, i.e. rho[j] bounds |w_j|.
    """
    T = baker.T
    pts = baker.z0 + 0.5 * delta * _circle(64) * np.array([[0.3], [0.7], [1.0]])
    drift = np.max(np.abs(baker.p(pts.ravel() + T) - baker.p(pts.ravel())))
    if drift > 1e-9:
        raise ValueError(f"p is not T-periodic (sampled drift {drift:.3e})")
    l = _nearest_translate(baker, z_start)
    e0 = abs(complex(z_start) - baker.center(l))
    if not e0 < delta / 2:
        raise ValueError(f"start is not within delta/2 of a translate z0 + lT (distance {e0:.4g})")
    if rho is None:
        rho = default_shadow_rho(F.g, max(abs(complex(w_start)), 1e-3 * delta), steps)
    if rho.K < steps:
        raise ValueError("rho sequence shorter than the number of steps")
    if abs(complex(w_start)) > rho[0]:
        raise ValueError("|w_start| exceeds rho_0")

    rec = iterate(F, (z_start, w_start), steps)
    n = len(rec.z)
    centers = baker.z0 + (l + rec.k) * T
    errors = np.abs(rec.z - centers)
    w_abs = np.abs(rec.w)
    hmax = np.array([math.exp(bidisk_log_max(F.h, centers[j], delta, rho.log_values[j], nz=nz))
                     for j in range(n)])
    step_bounds = rho.values[:n] * hmax
    bounds = 0.5 * delta + np.concatenate([[0.0], np.cumsum(step_bounds)[:-1]])
    in_tube = errors < delta
    tube_ok = bool(np.all(in_tube)) and n == steps + 1
    outside = np.nonzero(~in_tube)[0]
    left = int(rec.k[outside[0]]) if len(outside) else (None if tube_ok else n)
    induction = all(errors[j + 1] <= errors[j] + step_bounds[j] + slack
                    for j in range(n - 1) if in_tube[j])
    bound_ok = bool(np.all(errors[in_tube] < bounds[in_tube] + slack)) and \
        bool(np.all(bounds[in_tube] < delta))
    # |w_k| <= rho_k with rho_k -> 0 is what "w_k -> 0" means here
    rho_ok = bool(np.all(w_abs <= rho.values[:n] * (1 + 1e-12)))
    w_zero = rho_ok and rho[n - 1] < rho[0]
    return ShadowingReport(l, errors, bounds, step_bounds, w_abs, rho, tube_ok,
                           bool(induction), bound_ok, w_zero, left)
