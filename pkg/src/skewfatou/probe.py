"""Numeric evidence near the invariant fiber: non-normality certificates and bulging probes.

A certificate collects, at shrinking scales r_j, an offset w with |w| <= r_j
whose orbit reaches |z| >= E_j and another whose orbit stays bounded by B.
Such pairs are incompatible with a normal family of iterates at (z0, 0).
These are finite-horizon verdicts and count as evidence only.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .criteria import ShadowingReport, default_shadow_rho, shadowing_check
from .dynamics import OrbitRecord, SkewProduct, iterate, orbit_csv_text
from .gallery import BakerFamilyInstance

DEFAULT_E0 = 10.0
DEFAULT_B = 1e3
N_ARGS = 64
MAX_SHRINK = 20


@dataclass
class EscapeWitness:
    w: complex
    steps: int
    attained: float
    threshold: float
    orbit: OrbitRecord = field(repr=False, default=None)


@dataclass
class BoundedWitness:
    w: complex
    horizon: int
    max_norm: float
    bound: float
    orbit: OrbitRecord = field(repr=False, default=None)


@dataclass
class ScaleResult:
    j: int
    r: float
    escape: EscapeWitness | None
    bounded: BoundedWitness | None

    @property
    def complete(self) -> bool:
        return self.escape is not None and self.bounded is not None


@dataclass
class NonNormalityCertificate:
    z0: complex
    scales: list
    horizon: int
    ladder: list
    bound: float
    results: list

    @property
    def complete(self) -> bool:
        return all(r.complete for r in self.results)

    @property
    def verdict(self) -> str:
        for r in self.results:
            if not r.complete:
                return f"inconclusive at scale {r.r!r}"
        return "complete"


def _search_points(r: float, candidates) -> np.ndarray:
    pts = [complex(c) for c in candidates if abs(complex(c)) <= r and complex(c) != 0]
    args = np.exp(2j * np.pi * np.arange(N_ARGS) / N_ARGS)
    for i in range(MAX_SHRINK + 1):
        pts.extend((r * 2.0 ** -i) * args)
    return np.array(pts, dtype=np.complex128)


def _scan(F: SkewProduct, z0: complex, ws: np.ndarray, horizon: int, E: float):
    """First step reaching |z| >= E (or -1), and max |(z, w)| over the horizon (inf on overflow)."""
    z = np.full(ws.shape, complex(z0))
    w = ws.copy()
    first = np.full(ws.shape, -1)
    peak = np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, horizon + 1):
            z, w = F(z, w)
            norm = np.sqrt(np.abs(z) ** 2 + np.abs(w) ** 2)
            norm[~np.isfinite(norm)] = np.inf
            peak = np.maximum(peak, norm)
            hit = (first < 0) & (np.abs(z) >= E)
            first[hit] = k
    return first, peak


def _escape_from(F, z0, w, E, horizon):
    rec = iterate(F, (z0, w), horizon, escape_radius=E * (1 - 1e-15))
    az = np.abs(rec.z)
    idx = np.nonzero(az >= E)[0]
    if not len(idx):
        return None
    i = int(idx[0])
    return EscapeWitness(complex(w), int(rec.k[i]), float(az[i]), E, rec)


def _bounded_from(F, z0, w, B, horizon):
    rec = iterate(F, (z0, w), horizon)
    if rec.last_step != horizon:
        return None
    norm = float(np.max(np.sqrt(np.abs(rec.z) ** 2 + np.abs(rec.w) ** 2)))
    if not norm <= B:
        return None
    return BoundedWitness(complex(w), horizon, norm, B, rec)


def _search_scale(F, z0, j, r, horizon, E, B, candidates):
    ws = _search_points(r, candidates)
    first, peak = _scan(F, z0, ws, horizon, E)
    esc = bnd = None
    # scalar re-iteration fixes the reported numbers; the scan only proposes
    for i in np.nonzero(first >= 0)[0]:
        esc = _escape_from(F, z0, ws[i], E, horizon)
        if esc is not None:
            break
    for i in np.nonzero(peak <= B)[0]:
        bnd = _bounded_from(F, z0, ws[i], B, horizon)
        if bnd is not None:
            break
    return ScaleResult(j, float(r), esc, bnd)


def certify_non_normality(F: SkewProduct, z0: complex, scales, horizon: int, e_ladder=None,
                          bound: float = DEFAULT_B, candidates=(), threads: int = 1,
                          e0: float = DEFAULT_E0) -> NonNormalityCertificate:
    """Search escape and bounded witnesses on circles |w| = r_j 2^-i (i = 0..20, 64 arguments).

    ``candidates`` are tried first at every scale they fit (e.g. constructed witnesses).
    """
    scales = [float(r) for r in scales]
    if not scales:
        raise ValueError("scales must be non-empty")
    if any(not r > 0 for r in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be positive and strictly decreasing")
    if e_ladder is None:
        e_ladder = [(j + 1) * e0 for j in range(len(scales))]
    e_ladder = [float(e) for e in e_ladder]
    if len(e_ladder) != len(scales) or any(b <= a for a, b in zip(e_ladder, e_ladder[1:])):
        raise ValueError("E-ladder must be strictly increasing with one entry per scale")
    jobs = [(j + 1, r, e) for j, (r, e) in enumerate(zip(scales, e_ladder))]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda t: _search_scale(F, z0, t[0], t[1], horizon, t[2], bound, candidates),
                                jobs))
    return NonNormalityCertificate(complex(z0), scales, horizon, e_ladder, float(bound), results)


def reverify_certificate(cert: NonNormalityCertificate, F: SkewProduct) -> bool:
    """Re-iterate every witness independently and compare orbits bit for bit."""
    for r in cert.results:
        for wit in (r.escape, r.bounded):
            if wit is None:
                continue
            radius = wit.threshold * (1 - 1e-15) if isinstance(wit, EscapeWitness) else None
            steps = cert.horizon
            rec = iterate(F, (cert.z0, wit.w), steps, escape_radius=radius)
            if not (np.array_equal(rec.z, wit.orbit.z) and np.array_equal(rec.w, wit.orbit.w)):
                return False
    return True


def certificate_text(cert: NonNormalityCertificate, orbit_prefix: str = "orbit_cert") -> str:
    """Structured-text certificate; witness orbits are referenced by CSV file name."""
    lines = ["[certificate]",
             f"z0 = {cert.z0!r}",
             f"horizon = {cert.horizon}",
             f"bound = {cert.bound!r}",
             f"verdict = {cert.verdict}",
             f"scales = {len(cert.scales)}"]
    for r in cert.results:
        lines.append(f"[scale {r.j}]")
        lines.append(f"r = {r.r!r}")
        lines.append(f"E = {cert.ladder[r.j - 1]!r}")
        if r.escape:
            e = r.escape
            lines.append(f"escape_w = {e.w!r}")
            lines.append(f"escape_steps = {e.steps}")
            lines.append(f"escape_attained = {e.attained!r}")
            lines.append(f"escape_orbit = {orbit_prefix}_{r.j}_escape.csv")
        else:
            lines.append("escape_w = none")
        if r.bounded:
            b = r.bounded
            lines.append(f"bounded_w = {b.w!r}")
            lines.append(f"bounded_max_norm = {b.max_norm!r}")
            lines.append(f"bounded_orbit = {orbit_prefix}_{r.j}_bounded.csv")
        else:
            lines.append("bounded_w = none")
    return "\n".join(lines) + "\n"


def certificate_orbits(cert: NonNormalityCertificate, orbit_prefix: str = "orbit_cert") -> dict:
    """File name -> CSV text for every witness orbit."""
    out = {}
    for r in cert.results:
        if r.escape:
            out[f"{orbit_prefix}_{r.j}_escape.csv"] = orbit_csv_text(r.escape.orbit)
        if r.bounded:
            out[f"{orbit_prefix}_{r.j}_bounded.csv"] = orbit_csv_text(r.bounded.orbit)
    return out


# ---------------------------------------------------------------------------
# bulging


UNIFORM = "uniform-shadowing"
MIXED = "mixed-behavior"
INCONCLUSIVE = "inconclusive"


@dataclass
class BulgingSample:
    z: complex
    w: complex
    report: ShadowingReport | None
    error: str = ""

    @property
    def shadows(self) -> bool:
        return self.report is not None and self.report.shadows

    @property
    def left_tube(self) -> bool:
        return self.report is not None and not self.report.tube_ok

    @property
    def max_error(self) -> float:
        return float(np.max(self.report.errors)) if self.report is not None else math.nan


@dataclass
class BulgingReport:
    z_center: complex
    z_radius: float
    w_radius: float
    delta: float
    horizon: int
    samples: list
    verdict: str


def bulging_grid(z_center: complex, z_radius: float, w_radius: float, n: int = 5, fill: float = 0.7):
    """n x n z-grid inside 0.7 of the z-disk, paired with w on a circle of 0.7 w-radius."""
    s = np.linspace(-1.0, 1.0, n) / math.sqrt(2) if n > 1 else np.zeros(1)
    zs = [complex(z_center) + fill * z_radius * complex(a, b) for b in s for a in s]
    m = len(zs)
    ws = [fill * w_radius * np.exp(2j * math.pi * i / m) for i in range(m)]
    return list(zip(zs, (complex(w) for w in ws)))


def bulging_probe(F: SkewProduct, baker: BakerFamilyInstance, z_center: complex = 0.1, z_radius: float = 0.2,
                  w_radius: float = 0.01, delta: float = 0.5, horizon: int = 50, grid: int = 5,
                  starts=None) -> BulgingReport:
    """Shadowing check for a grid of starts in D(z_center, z_radius) x D(0, w_radius).

    The verdict is uniform-shadowing iff every sample stays in the delta-tube
    with w_k -> 0, mixed-behavior if some sample shadows while another leaves
    the tube, and inconclusive otherwise.
    """
    if starts is None:
        starts = bulging_grid(z_center, z_radius, w_radius, grid)
    rho = default_shadow_rho(F.g, w_radius, horizon)
    samples = []
    for z, w in starts:
        try:
            rep = shadowing_check(F, baker, z, w, delta, horizon, rho)
            samples.append(BulgingSample(z, w, rep))
        except ValueError as exc:
            samples.append(BulgingSample(z, w, None, str(exc)))
    if samples and all(s.shadows for s in samples):
        verdict = UNIFORM
    elif any(s.shadows for s in samples) and any(s.left_tube for s in samples):
        verdict = MIXED
    else:
        verdict = INCONCLUSIVE
    return BulgingReport(complex(z_center), z_radius, w_radius, delta, horizon, samples, verdict)


def bulging_text(rep: BulgingReport) -> str:
    lines = ["[bulging]",
             f"z_center = {rep.z_center!r}",
             f"z_radius = {rep.z_radius!r}",
             f"w_radius = {rep.w_radius!r}",
             f"delta = {rep.delta!r}",
             f"horizon = {rep.horizon}",
             f"samples = {len(rep.samples)}",
             f"verdict = {rep.verdict}"]
    for i, s in enumerate(rep.samples):
        if s.report is None:
            lines.append(f"sample_{i} = z={s.z!r} w={s.w!r} invalid: {s.error}")
        else:
            r = s.report
            lines.append(f"sample_{i} = z={s.z!r} w={s.w!r} max_e={s.max_error:.6g} "
                         f"tube={r.tube_ok} induction={r.induction_ok} w_to_zero={r.w_to_zero} "
                         f"left_at={r.left_tube_at}")
    return "\n".join(lines) + "\n"
