"""Finite stages of an inductive construction of a perturbation h that makes (z0, 0) a Julia point.

Given an orbit z_j = f^j(z0) whose moduli reach new records along n_0 < n_1 < ...,
stage k picks two tiny fiber offsets w_k, w~_k whose orbits land in two small
disks Delta_k, Delta~_k near z_{n_k}.  A polynomial h_k is then fitted so that
it stays close to h_{k-1} on the big disk H_k and takes the constants on the
Delta disks that send one orbit to about k+1 and the other to about 0 at the
next step.  Everything checkable is re-checked by sampling and reported with
margins.

h_k is kept as h_0 plus the list of fitted increments h_j - h_{j-1}; each
increment is fitted to Phi - h_{j-1}, which vanishes on H_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .approx import (AffineMap, ApproximationProblem, Disk, Piece, PolynomialFit, PowerMap,
                     certify_sup_error, fit_piecewise)
from .dynamics import fiber_orbit, select_escaping_subsequence
from .expr import W, Z, Expr, Poly, Var

DEFAULT_THETA = 0.5
DEFAULT_DELTA_START = 0.9
BOUNDARY_SAMPLES = 2048
INTERIOR_SAMPLES = 512
FIT_MARGIN = 1.1
POWER_SPREAD = 0.2 * math.pi
ONE_THIRD = 1.0 / 3.0


class ConstructionError(RuntimeError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    bound: float
    note: str = ""

    @property
    def margin(self) -> float:
        return self.bound - self.value


# ---------------------------------------------------------------------------
# geometry


@dataclass
class ConstructionGeometry:
    orbit: list
    n: list
    z_n: list
    delta_tilde: list
    delta: list
    theta: float
    checks: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.delta_tilde) - 1

    def D(self, k: int) -> Disk:
        return Disk(self.z_n[k], self.delta[k])

    def H_radius(self, k: int, delta: float | None = None) -> float:
        if k == 0:
            return 0.0
        d = self.delta[k] if delta is None else delta
        return abs(self.z_n[k]) - 2 * d

    def H(self, k: int) -> Disk | None:
        return None if k == 0 else Disk(0.0, self.H_radius(k))

    def verify(self) -> list:
        """Geometric invariants (ranges, disjointness, nesting) with margins."""
        checks = []
        K = self.K
        for k in range(K + 1):
            checks.append(Check(f"0<delta_{k}<delta_tilde_{k}", 0 < self.delta[k] < self.delta_tilde[k],
                                self.delta[k], self.delta_tilde[k]))
            checks.append(Check(f"delta_{k}<1/3", self.delta[k] < ONE_THIRD, self.delta[k], ONE_THIRD))
        for j in range(K + 1):
            for k in range(j + 1, K + 1):
                dist = abs(self.z_n[j] - self.z_n[k])
                checks.append(Check(f"D_{j} disjoint D_{k}", dist - self.delta[j] - self.delta[k] > 0,
                                    self.delta[j] + self.delta[k], dist))
        for k in range(1, K):
            checks.append(Check(f"H_{k} in int H_{k+1}", self.H_radius(k) < self.H_radius(k + 1),
                                self.H_radius(k), self.H_radius(k + 1)))
        for k in range(1, K + 1):
            rH = self.H_radius(k)
            for j in range(K + 1):
                reach = abs(self.z_n[j]) + self.delta[j]
                if j < k:
                    checks.append(Check(f"D_{j} in H_{k}", reach <= rH, reach, rH))
                else:
                    near = abs(self.z_n[j]) - self.delta[j]
                    checks.append(Check(f"H_{k} misses D_{j}", rH < near, rH, near))
            inner = max(abs(self.orbit[j]) for j in range(self.n[k]))
            checks.append(Check(f"z_j in int H_{k} (j<n_{k})", inner < rH, inner, rH))
        self.checks = checks
        return checks


def build_geometry(f: Expr, z0: complex, window: int = 8, K: int = 2, theta: float = DEFAULT_THETA,
                   delta_start: float = DEFAULT_DELTA_START) -> ConstructionGeometry:
    """Record subsequence, delta~_k at theta times their bounds, and provisional delta_k."""
    if not 0 < theta < 1 or not 0 < delta_start < 1:
        raise ValueError("theta and delta_start must lie in (0, 1)")
    orbit = [complex(v) for v in fiber_orbit(f, z0, window)]
    sub = select_escaping_subsequence(orbit)
    n = sub.indices
    if len(n) < K + 2:
        raise ConstructionError(f"escaping subsequence too short: {n} (need {K + 2} indices)")
    n = n[: K + 2]
    mod = [abs(z) for z in orbit]
    zn = [orbit[i] for i in n]
    dt = [theta * min((mod[n[1]] - mod[n[0]]) / 4, 1.0)]
    for k in range(1, K + 1):
        inner = min(mod[n[k]] - mod[j] for j in range(n[k]))
        dt.append(theta * min(inner / 4, (mod[n[k + 1]] - mod[n[k]]) / 4, dt[k - 1] / 2))
    delta = [delta_start * min(d, 0.25) for d in dt]
    geo = ConstructionGeometry(orbit, n, zn, dt, delta, theta)
    bad = [c for c in geo.verify() if not c.passed]
    if bad:
        raise ConstructionError(f"geometry invariant violated: {bad[0]}")
    return geo


# ---------------------------------------------------------------------------
# perturbation h_k = h_0 + increments


@dataclass
class ChainPerturbation:
    """h_0 plus a list of fitted increments; callable as h(z)."""

    base: Expr
    increments: list = field(default_factory=list)

    def __call__(self, z, w=None):
        with np.errstate(over="ignore", invalid="ignore"):
            v = self.base(z)
            for q in self.increments:
                v = v + q(z)
        return v

    def extended(self, q) -> "ChainPerturbation":
        return ChainPerturbation(self.base, self.increments + [q])

    def log_abs(self, z) -> np.ndarray:
        """Approximate log|h| that survives overflow (max of term magnitudes where needed)."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        v = self(z)
        out = np.log(np.abs(v))
        bad = ~np.isfinite(v)
        if np.any(bad):
            terms = [np.log(np.abs(self.base(z[bad])))]
            for q in self.increments:
                terms.append(q.log_abs(z[bad]) if hasattr(q, "log_abs") else np.log(np.abs(q(z[bad]))))
            out[bad] = np.max(np.vstack(terms), axis=0)
        return out


def identity_perturbation() -> ChainPerturbation:
    return ChainPerturbation(Var(Z))


def orbit_z(f: Expr, g: Expr, h, z0: complex, w, steps: int):
    """z-projections F_h^j(z0, w) for j = 0..steps (vectorized over w)."""
    w = np.asarray(w, dtype=np.complex128)
    z = np.full(w.shape, complex(z0), dtype=np.complex128)
    out = [z]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            z, w = f(z) + w * h(z), g(0.0, w)
            out.append(z)
    return out


def g_orbit(g: Expr, w, steps: int) -> list:
    out = [np.complex128(w)]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            out.append(g(0.0, out[-1]))
    return out


# ---------------------------------------------------------------------------
# stage pieces


@dataclass
class Witnesses:
    w: complex
    w_tilde: complex
    centers: tuple
    halvings: int


def _witness_conditions(geo, h_prev, f, g, k, r, delta):
    w, wt = r, -r
    nk = geo.n[k]
    rH = geo.H_radius(k, delta)
    res = []
    for x in (w, wt):
        res.append(abs(x) < 1.0 / k)
        gs = g_orbit(g, x, nk + 1)
        res.append(all(abs(v) < 1 for v in gs))
    zs = orbit_z(f, g, h_prev, geo.orbit[0], np.array([w, wt]), nk)
    for j in range(nk):
        res.append(bool(np.all(np.abs(zs[j]) < rH)))
    c, ct = complex(zs[nk][0]), complex(zs[nk][1])
    res.append(abs(c - geo.z_n[k]) < delta)
    res.append(abs(ct - geo.z_n[k]) < delta)
    res.append(abs(c - ct) > 1e-12 * max(1.0, abs(c)))
    return all(res), (c, ct)


def find_fiber_witnesses(geo: ConstructionGeometry, h_prev, f: Expr, g: Expr, k: int,
                         delta: float | None = None, start: float | None = None) -> Witnesses:
    """Halve |w| until w = r and w~ = -r satisfy the stage-k witness conditions."""
    if k < 1:
        raise ValueError("witnesses are defined for k >= 1")
    delta = geo.delta[k] if delta is None else delta
    r = 0.5 / k if start is None else start
    halvings = 0
    while r > 1e-300:
        ok, centers = _witness_conditions(geo, h_prev, f, g, k, r, delta)
        if ok:
            return Witnesses(complex(r), complex(-r), centers, halvings)
        r *= 0.5
        halvings += 1
    raise ConstructionError(f"witness modulus underflow at stage {k}")


def oscillation(f: Expr, disk: Disk, n: int = 256, chunk: int = 1024) -> float:
    """Sampled max |f(z) - f(z')| over the closed disk (attained on boundary pairs)."""
    v = f(disk.boundary(n))
    best = 0.0
    for s in range(0, n, chunk):
        d = np.abs(v[s:s + chunk, None] - v[None, :])
        best = max(best, float(d.max()))
    return best


def choose_radius(f: Expr, geo: ConstructionGeometry, centers, k: int, delta: float | None = None,
                  samples: int = 256, shrink: float = 0.9) -> float:
    """0.9 x the largest radius keeping both disks inside D_k, disjoint, with f-oscillation < 1/3."""
    delta = geo.delta[k] if delta is None else delta
    c, ct = centers
    zc = geo.z_n[k]
    d = abs(c - ct)
    room = delta - max(abs(c - zc), abs(ct - zc))
    hi = min(ONE_THIRD, 0.45 * d, room)
    if not hi > 0:
        raise ConstructionError(f"no positive radius at stage {k} (room {room:.3g}, separation {d:.3g})")

    def good(R):
        return all(oscillation(f, Disk(x, R), samples) < ONE_THIRD for x in (c, ct))

    if good(hi):
        best = hi
    else:
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if good(mid):
                lo = mid
            else:
                hi = mid
        best = lo
    if not best > 0:
        raise ConstructionError(f"no radius passes the oscillation bound at stage {k}")
    return shrink * best


@dataclass
class StabilityReport:
    delta: float
    trials: int
    max_displacement: float
    limit: float
    tried: list
    passed: bool


def _random_perturbation(rng, radius: float, size: float, max_degree: int = 10, samples: int = 256):
    deg = int(rng.integers(0, max_degree + 1))
    coeffs = rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)
    q = Poly(tuple(coeffs), Z)
    sup = float(np.max(np.abs(q(radius * np.exp(2j * np.pi * np.arange(samples) / samples)))))
    return Poly(tuple(coeffs * (size * (1 - 1e-9) / sup)), Z)


def estimate_stability_radius(h_prev, f: Expr, g: Expr, geo: ConstructionGeometry, k: int, R: float,
                              wit: Witnesses, trials: int = 64, seed: int = 0,
                              start: float | None = None) -> StabilityReport:
    """Largest delta (halving from ``start``) whose random perturbations of sup <= delta on H_k
    move both n_k-step projections by less than R/2."""
    cap = min(geo.delta_tilde[k], 0.25)
    delta = DEFAULT_DELTA_START * cap if start is None else min(start, DEFAULT_DELTA_START * cap)
    nk = geo.n[k]
    ws = np.array([wit.w, wit.w_tilde])
    base = np.array(wit.centers)
    tried = []
    rng = np.random.default_rng(seed)
    while delta > 1e-300:
        rH = geo.H_radius(k, delta)
        worst = 0.0
        for t in range(trials):
            if t < 4:
                q = Poly((delta * (1 - 1e-9) * 1j ** t,), Z)
            else:
                q = _random_perturbation(rng, rH, delta)
            ht = h_prev.extended(q)
            moved = orbit_z(f, g, ht, geo.orbit[0], ws, nk)[nk]
            worst = max(worst, float(np.max(np.abs(moved - base))))
        tried.append((delta, worst))
        if worst < R / 2:
            return StabilityReport(delta, trials, worst, R / 2, tried, True)
        delta *= 0.5
    raise ConstructionError(f"stability radius underflow at stage {k}")


# ---------------------------------------------------------------------------
# stages


@dataclass
class StageState:
    k: int
    h: ChainPerturbation
    delta: float
    R: float
    w: complex | None = None
    w_tilde: complex | None = None
    Delta: Disk | None = None
    Delta_tilde: Disk | None = None
    constants: tuple | None = None
    tolerance: float | None = None
    fit: PolynomialFit | None = None
    certified: object = None
    stability: StabilityReport | None = None
    checks: list = field(default_factory=list)
    status: str = "complete"
    message: str = ""
    info: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    @property
    def passed(self) -> bool:
        return self.complete and all(c.passed for c in self.checks)


def stage_zero(geo: ConstructionGeometry) -> StageState:
    d0 = geo.delta[0]
    st = StageState(0, identity_perturbation(), d0, d0, w=1.0 + 0j, w_tilde=-1.0 + 0j)
    bound = min(geo.delta_tilde[0], 0.25)
    st.checks = [
        Check("R_0 = delta_0", st.R == st.delta, st.R, st.delta),
        Check("0 < delta_0 < min(delta_tilde_0, 1/4)", 0 < d0 < bound, d0, bound),
        Check("h_0 nonconstant", True, 1.0, 1.0, "identity"),
    ]
    return st


def _disk_points(disk: Disk, nb: int, ni: int, rng) -> np.ndarray:
    return np.concatenate([disk.boundary(nb, 0.25), disk.interior(ni, rng)])


def _power_for(geo: ConstructionGeometry, k: int, R: float) -> int:
    N = max(1, int(round(POWER_SPREAD * abs(geo.z_n[k]) / R)))
    return N if N % 2 else N + 1


def build_stage(prev: list, geo: ConstructionGeometry, f: Expr, g: Expr, k: int, max_degree: int = 1500,
                samples_per_disk: int = 4096, premap: str = "power", trials: int = 64, seed: int = 0,
                max_rounds: int = 8) -> StageState:
    """Stage k >= 1: witnesses, radii, stability radius, fit, and re-verification.

    ``prev`` holds the completed stages 0..k-1.  A stage whose fit cannot be
    carried out (or misses its tolerance) comes back with ``status`` set to
    "failed" and the measured numbers, never silently.
    """
    h_prev = prev[-1].h
    nk = geo.n[k]
    delta = geo.delta[k]
    for rnd in range(max_rounds):
        wit = find_fiber_witnesses(geo, h_prev, f, g, k, delta)
        while True:
            try:
                R = choose_radius(f, geo, wit.centers, k, delta)
                break
            except ConstructionError:
                wit = find_fiber_witnesses(geo, h_prev, f, g, k, delta, start=abs(wit.w) / 2)
        stab = estimate_stability_radius(h_prev, f, g, geo, k, R, wit, trials, seed + k, start=delta)
        if stab.delta == delta:
            break
        delta = stab.delta
    else:
        raise ConstructionError(f"stage {k}: radii did not settle")
    geo.delta[k] = delta

    c, ct = wit.centers
    gn = g_orbit(g, wit.w, nk)[nk]
    gnt = g_orbit(g, wit.w_tilde, nk)[nk]
    A = complex(-(complex(f(c)) - (k + 1)) / gn)
    B = complex(-complex(f(ct)) / gnt)
    eps = 2.0 ** -(k + 1) * min([s.delta for s in prev] + [delta])
    Dk, Dkt = Disk(c, R), Disk(ct, R)
    Hk = geo.H(k)
    st = StageState(k, h_prev, delta, R, wit.w, wit.w_tilde, Dk, Dkt, (A, B), eps, stability=stab)
    st.info = {"witness_halvings": wit.halvings, "rounds": rnd + 1, "g_nk_w": complex(gn),
               "g_nk_w_tilde": complex(gnt), "H_radius": Hk.radius}

    # targets for the increment q = h_k - h_{k-1}
    def t_H(z):
        return np.zeros_like(z)

    def t_D(z):
        return A - h_prev(z)

    def t_Dt(z):
        return B - h_prev(z)

    probe = np.concatenate([Dk.boundary(256), Dkt.boundary(256)])
    hv = h_prev(probe)
    if not np.all(np.isfinite(hv)):
        lg = float(np.max(h_prev.log_abs(probe)) / math.log(10))
        st.status = "failed"
        st.message = (f"target not representable in double precision: h_{k-1} overflows on the "
                      f"Delta disks (log10|h_{k-1}| up to {lg:.4g})")
        st.info["log10_h_prev_on_Delta"] = lg
        return st

    if premap == "power":
        N = _power_for(geo, k, R)
        pm = PowerMap(0.0, abs(geo.z_n[k]), N)
    else:
        pm = None
    fit_tol = eps / FIT_MARGIN
    problem = ApproximationProblem([Piece(Hk, t_H, fit_tol, f"H_{k}"),
                                    Piece(Dk, t_D, fit_tol, f"Delta_{k}"),
                                    Piece(Dkt, t_Dt, fit_tol, f"Delta~_{k}")])
    try:
        fit = fit_piecewise(problem, max_degree, samples_per_disk, premap=pm)
    except ArithmeticError as exc:
        st.status = "failed"
        st.message = f"fit could not be carried out: {exc}"
        return st
    st.fit = fit
    st.info["premap"] = pm if pm is not None else fit.diagnostics["premap"]
    cert_problem = ApproximationProblem([Piece(p.disk, p.target, eps, p.name) for p in problem.pieces])
    st.certified = certify_sup_error(fit, cert_problem)
    h_new = h_prev.extended(fit.poly)
    st.h = h_new
    st.checks = verify_stage(st, prev, geo, f, g, seed)
    if not fit.ok:
        st.status = "failed"
        st.message = (f"fit missed tolerance at basis degree {fit.basis_degree}: "
                      f"worst achieved/requested = {fit.worst_ratio:.3g}")
    elif not all(c.passed for c in st.checks):
        st.status = "failed"
        st.message = "properties failed: " + ", ".join(c.name for c in st.checks if not c.passed)
    return st


def verify_stage(st: StageState, prev: list, geo: ConstructionGeometry, f: Expr, g: Expr,
                 seed: int = 0) -> list:
    """Re-check properties (i)-(vii) for a built stage by sampling."""
    k = st.k
    nk = geo.n[k]
    rng = np.random.default_rng(10_000 + seed + k)
    checks = []
    # (i)
    for name, x in (("w", st.w), ("w~", st.w_tilde)):
        checks.append(Check(f"(i) |{name}_{k}| < 1/k", abs(x) < 1 / k, abs(x), 1 / k))
        gmax = max(abs(v) for v in g_orbit(g, x, nk + 1))
        checks.append(Check(f"(i) |g^j({name}_{k})| < 1, j<=n_k+1", gmax < 1, gmax, 1.0))
    # (ii)
    Dk = geo.D(k)
    for name, disk in (("Delta", st.Delta), ("Delta~", st.Delta_tilde)):
        reach = abs(disk.center - Dk.center) + disk.radius
        checks.append(Check(f"(ii) {name}_{k} in D_{k}", reach < Dk.radius, reach, Dk.radius))
    sep = abs(st.Delta.center - st.Delta_tilde.center)
    checks.append(Check(f"(ii) Delta_{k}, Delta~_{k} disjoint", 2 * st.R < sep, 2 * st.R, sep))
    # (iii)
    q = st.fit.poly
    Hk = geo.H(k)
    pts = _disk_points(Hk, BOUNDARY_SAMPLES, INTERIOR_SAMPLES, rng)
    sup_q = float(np.max(np.abs(q(pts))))
    cert = st.certified.errors
    worst = max(sup_q, float(cert[0]))
    checks.append(Check(f"(iii) sup_H |h_{k} - h_{k-1}| < eps_{k}", worst < st.tolerance, worst,
                        st.tolerance, f"sampled {sup_q:.3e}, certified {cert[0]:.3e}"))
    # (iv), (v)
    A, B = st.constants
    for idx, (name, disk, const) in enumerate((("(iv)", st.Delta, A), ("(v)", st.Delta_tilde, B)), 1):
        pts = _disk_points(disk, BOUNDARY_SAMPLES, INTERIOR_SAMPLES, rng)
        err = float(np.max(np.abs(st.h(pts) - const)))
        worst = max(err, float(cert[idx]))
        checks.append(Check(f"{name} sup |h_{k} - Phi| on disk < 1/3", worst < ONE_THIRD, worst, ONE_THIRD,
                            f"sampled {err:.3e}, certified {cert[idx]:.3e}"))
        checks.append(Check(f"{name} fit error < eps_{k}", worst < st.tolerance, worst, st.tolerance))
    # (vi)
    s = st.stability
    checks.append(Check(f"(vi) perturbed projections move < R_{k}/2", s.passed and s.max_displacement < s.limit,
                        s.max_displacement, s.limit, f"{s.trials} trials at delta={s.delta:.6g}"))
    checks.append(Check(f"(vi) delta_{k} <= min(delta_tilde_{k}, 1/4)",
                        st.delta <= min(geo.delta_tilde[k], 0.25), st.delta, min(geo.delta_tilde[k], 0.25)))
    # (vii)
    for name, disk in (("Delta", st.Delta), ("Delta~", st.Delta_tilde)):
        osc = oscillation(f, disk, BOUNDARY_SAMPLES)
        checks.append(Check(f"(vii) oscillation of f on {name}_{k} < 1/3", osc < ONE_THIRD, osc, ONE_THIRD))
    checks.append(Check(f"R_{k} < 1/3", st.R < ONE_THIRD, st.R, ONE_THIRD))
    # witness conditions with the final delta_k
    ok, centers = _witness_conditions(geo, prev[-1].h, f, g, k, abs(st.w), st.delta)
    checks.append(Check(f"witness conditions at final delta_{k}", ok, 0.0, 0.0))
    return checks


# ---------------------------------------------------------------------------
# assembly and dichotomy


@dataclass
class AssembledPerturbation:
    h: ChainPerturbation
    K: int
    checks: list
    cauchy: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def assemble_h(stages: list, geo: ConstructionGeometry, seed: int = 0) -> AssembledPerturbation:
    """h = h_K from the completed stages; telescoping and Cauchy checks on each H_m."""
    done = [s for s in stages if s.complete]
    if len(done) < 2:
        raise ConstructionError("need at least one completed stage beyond stage 0")
    K = done[-1].k
    h = done[-1].h
    rng = np.random.default_rng(20_000 + seed)
    checks = []
    pts_cache = {}

    def pts(m):
        if m not in pts_cache:
            pts_cache[m] = _disk_points(geo.H(m), BOUNDARY_SAMPLES, INTERIOR_SAMPLES, rng)
        return pts_cache[m]

    hv = {m: h(pts(m)) for m in range(1, K + 1)}
    for k in range(K):
        z = pts(k + 1)
        diff = float(np.max(np.abs(hv[k + 1] - done[k].h(z))))
        d = done[k + 1].delta
        checks.append(Check(f"sup_H_{k+1} |h - h_{k}| < delta_{k+1}", diff < d, diff, d))
    # increments telescope to h_K - h_0
    for m in range(1, K + 1):
        z = pts(m)
        total = sum(q(z) for q in h.increments)
        resid = float(np.max(np.abs(hv[m] - h.base(z) - total)))
        scale = 1.0 + float(np.max(np.abs(hv[m])))
        checks.append(Check(f"telescoping identity on H_{m}", resid <= 1e-10 * scale, resid, 1e-10 * scale))
    cauchy = []
    for m in range(1, K + 1):
        z = pts(m)
        sups = [float(np.max(np.abs(q(z)))) for q in h.increments[m - 1:]]
        bound = sum(done[j].tolerance for j in range(m, K + 1))
        cauchy.append((m, sups, sum(sups), bound))
        checks.append(Check(f"Cauchy tail on H_{m}", sum(sups) < bound, sum(sups), bound))
    return AssembledPerturbation(h, K, checks, cauchy)


@dataclass
class DichotomyRow:
    k: int
    escape_value: complex
    bounded_value: complex
    g_escape: float
    g_bounded: float
    fiber_exact: bool
    escape_ok: bool
    bounded_ok: bool

    @property
    def passed(self) -> bool:
        return self.escape_ok and self.bounded_ok and self.fiber_exact


def dichotomy_check(h, geo: ConstructionGeometry, stages: list, f: Expr, g: Expr) -> list:
    """Iterate F_h for n_k + 1 steps from (z0, w_k) and (z0, w~_k)."""
    rows = []
    z0 = geo.orbit[0]
    for st in stages:
        if st.k == 0 or not st.complete:
            continue
        k, nk = st.k, geo.n[st.k]
        zs = orbit_z(f, g, h, z0, np.array([st.w, st.w_tilde]), nk + 1)
        v, vt = complex(zs[nk + 1][0]), complex(zs[nk + 1][1])
        ge = abs(g_orbit(g, st.w, nk + 1)[-1])
        gb = abs(g_orbit(g, st.w_tilde, nk + 1)[-1])
        fib = complex(orbit_z(f, g, h, z0, np.array([0j]), nk)[nk][0])
        rows.append(DichotomyRow(k, v, vt, ge, gb, fib == geo.z_n[k],
                                 abs(v - (k + 1)) < 1 and abs(v) > k and ge < 1,
                                 abs(vt) < 1 and gb < 1))
    return rows


@dataclass
class ConstructionRun:
    geometry: ConstructionGeometry
    stages: list
    assembled: AssembledPerturbation | None
    dichotomy: list
    f: Expr
    g: Expr

    @property
    def completed_stages(self) -> list:
        return [s for s in self.stages if s.complete]


def run_construction(f: Expr, g: Expr, z0: complex, K: int = 2, max_degree: int = 1500,
                     theta: float = DEFAULT_THETA, window: int = 8, samples_per_disk: int = 4096,
                     premap: str = "power", trials: int = 64, seed: int = 0) -> ConstructionRun:
    """Stages 0..K in order, stopping at the first stage that fails."""
    if g.uses(Z) or not g.uses(W):
        raise ValueError("g must be a nonconstant function of w")
    if abs(complex(g(0.0, 0.0))) > 1e-12:
        raise ValueError("g(0) must be 0")
    geo = build_geometry(f, z0, window, K, theta)
    stages = [stage_zero(geo)]
    for k in range(1, K + 1):
        try:
            st = build_stage(stages, geo, f, g, k, max_degree, samples_per_disk, premap, trials, seed)
        except ConstructionError as exc:
            st = StageState(k, stages[-1].h, geo.delta[k], 0.0, status="failed", message=str(exc))
        stages.append(st)
        if not st.complete:
            break
    geo.verify()
    assembled = assemble_h(stages, geo, seed) if len([s for s in stages if s.complete]) >= 2 else None
    dich = dichotomy_check(assembled.h, geo, stages, f, g) if assembled else []
    return ConstructionRun(geo, stages, assembled, dich, f, g)
