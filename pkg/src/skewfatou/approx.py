"""Polynomial approximation of piecewise targets on unions of disjoint closed disks.

A single polynomial is fitted by weighted least squares on boundary samples of
all disks.  The basis is built by Arnoldi (Vandermonde with Arnoldi), which
keeps the discrete basis orthonormal and the problem well-conditioned even at
degrees in the hundreds or thousands.  Because the bases are nested, the fit
of every lower degree is a prefix of the coefficient vector, so a single
Arnoldi sweep tries all degrees.

The variable can first be passed through a premap x = B(z): an affine map
(the default) or a power map ((z - a)/s)^N.  The fitted polynomial is then
A(B(z)), of true degree N * deg A in z.  Power maps are useful when one small
disk must be separated from a large one centred at the origin: B sends the
large disk to a tiny neighbourhood of 0 while keeping the small disks
at modulus of order one.

Errors are measured on the boundary only; for a polynomial minus a holomorphic
target the maximum modulus principle makes that the sup over the closed disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_SAMPLES = 4096
CERT_DENSITY = 4
CERT_SAFETY = 1.05


class SingularFitError(ArithmeticError):
    def __init__(self, message, diagnostics):
        self.diagnostics = diagnostics
        super().__init__(f"{message}; diagnostics: {diagnostics}")


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def boundary(self, n: int, offset: float = 0.0) -> np.ndarray:
        t = 2 * np.pi * (np.arange(n) + offset) / n
        return self.center + self.radius * np.exp(1j * t)

    def interior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        r = self.radius * np.sqrt(rng.random(n))
        t = 2 * np.pi * rng.random(n)
        return self.center + r * np.exp(1j * t)

    def gap(self, other: "Disk") -> float:
        return abs(self.center - other.center) - self.radius - other.radius


@dataclass(frozen=True)
class Piece:
    disk: Disk
    target: Callable
    tol: float
    name: str = ""


class ApproximationProblem:
    """Finitely many pairwise disjoint closed disks with a target and tolerance each."""

    def __init__(self, pieces: Sequence[Piece]):
        self.pieces = list(pieces)
        if not self.pieces:
            raise ValueError("at least one piece required")
        for p in self.pieces:
            if not p.disk.radius > 0:
                raise ValueError("disk radii must be positive")
            if not p.tol > 0:
                raise ValueError("tolerances must be positive")
        for i, a in enumerate(self.pieces):
            for b in self.pieces[i + 1:]:
                if not a.disk.gap(b.disk) > 0:
                    raise ValueError(f"disks {a.name or a.disk} and {b.name or b.disk} are not disjoint")

    def __len__(self):
        return len(self.pieces)


# ---------------------------------------------------------------------------
# premaps


@dataclass(frozen=True)
class AffineMap:
    center: complex
    scale: float
    power: int = 1

    def __call__(self, z):
        return (np.asarray(z, dtype=np.complex128) - self.center) / self.scale


@dataclass(frozen=True)
class PowerMap:
    center: complex
    scale: float
    power: int

    def __call__(self, z):
        u = (np.asarray(z, dtype=np.complex128) - self.center) / self.scale
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.ones_like(u)
            b, n = u, self.power
            while n:
                if n & 1:
                    out = out * b
                n >>= 1
                if n:
                    b = b * b
        return out


def default_premap(problem: ApproximationProblem) -> AffineMap:
    """Affine map sending the union of disks into the closed unit disk."""
    cs = np.array([p.disk.center for p in problem.pieces])
    rs = np.array([p.disk.radius for p in problem.pieces])
    lo = np.min(cs.real - rs) + 1j * np.min(cs.imag - rs)
    hi = np.max(cs.real + rs) + 1j * np.max(cs.imag + rs)
    c = 0.5 * (lo + hi)
    s = float(np.max(np.abs(cs - c) + rs))
    return AffineMap(complex(c), s)


# ---------------------------------------------------------------------------
# polynomial in the Arnoldi basis


@dataclass
class ArnoldiPolynomial:
    """p(z) = sum_k c_k q_k(B(z)) with q_k from the Hessenberg recurrence."""

    premap: object
    H: np.ndarray          # (n+1, n) upper Hessenberg
    coeffs: np.ndarray     # (n+1,)
    q0: float              # constant value of q_0

    @property
    def basis_degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree(self) -> int:
        return self.basis_degree * int(getattr(self.premap, "power", 1))

    def truncated(self, m: int) -> "ArnoldiPolynomial":
        return ArnoldiPolynomial(self.premap, self.H[: m + 1, :m], self.coeffs[: m + 1].copy(), self.q0)

    def __call__(self, z, w=None, chunk: int = 4096):
        z = np.asarray(z, dtype=np.complex128)
        flat = z.ravel()
        out = np.empty(flat.shape, dtype=np.complex128)
        for s in range(0, flat.size, chunk):
            out[s:s + chunk] = self._eval(self.premap(flat[s:s + chunk]))
        return out.reshape(z.shape) if z.shape else out[0]

    def _eval(self, x: np.ndarray) -> np.ndarray:
        n = self.basis_degree
        P = x.size
        Q = np.empty((n + 1, P), dtype=np.complex128)
        Q[0] = self.q0
        H = self.H
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n):
                v = x * Q[k]
                v -= H[: k + 1, k] @ Q[: k + 1]
                Q[k + 1] = v / H[k + 1, k]
            return self.coeffs @ Q

    def log_abs(self, z) -> np.ndarray:
        """log|p(z)| with running rescaling of the recurrence, for points where p overflows."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
        x = self.premap(z)
        n, P = self.basis_degree, z.size
        Q = np.empty((n + 1, P), dtype=np.complex128)
        Q[0] = self.q0
        logscale = np.zeros(P)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n):
                v = x * Q[k] - self.H[: k + 1, k] @ Q[: k + 1]
                Q[k + 1] = v / self.H[k + 1, k]
                mag = np.abs(Q[k + 1])
                big = mag > 1e100
                if np.any(big):
                    Q[: k + 2, big] /= mag[big]
                    logscale[big] += np.log(mag[big])
            val = self.coeffs @ Q
        out = np.log(np.abs(val)) + logscale
        out[~np.isfinite(x)] = np.inf
        return out

    def monomial_coefficients(self) -> np.ndarray:
        """Coefficients in powers of the premapped variable x (ill-conditioned at high degree)."""
        n = self.basis_degree
        C = np.zeros((n + 1, n + 1), dtype=np.complex128)
        C[0, 0] = self.q0
        for k in range(n):
            v = np.zeros(n + 1, dtype=np.complex128)
            v[1:] = C[k, :-1]
            v -= self.H[: k + 1, k] @ C[: k + 1]
            C[k + 1] = v / self.H[k + 1, k]
        return self.coeffs @ C

    def z_coefficients(self) -> np.ndarray:
        """Monomial coefficients in z; only for affine premaps."""
        pm = self.premap
        if int(getattr(pm, "power", 1)) != 1:
            raise ValueError("z-coefficients are only available for affine premaps")
        a = self.monomial_coefficients()
        # x = (z - c)/s: expand each x^k with the binomial theorem
        n = len(a) - 1
        out = np.zeros(n + 1, dtype=np.complex128)
        c, s = pm.center, pm.scale
        for k in range(n + 1):
            for j in range(k + 1):
                out[j] += a[k] * math.comb(k, j) * (-c) ** (k - j) / s ** k
        return out


# ---------------------------------------------------------------------------
# fitting


@dataclass
class PolynomialFit:
    poly: ArnoldiPolynomial
    achieved: np.ndarray
    requested: np.ndarray
    success: np.ndarray
    diagnostics: dict
    history: np.ndarray = field(repr=False, default=None)
    names: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.success))

    @property
    def degree(self) -> int:
        return self.poly.degree

    @property
    def basis_degree(self) -> int:
        return self.poly.basis_degree

    @property
    def worst_ratio(self) -> float:
        return float(np.max(self.achieved / self.requested))

    def __call__(self, z, w=None):
        return self.poly(z)


def _eval_target(target, z):
    with np.errstate(over="ignore", invalid="ignore"):
        v = target(z)
    return np.broadcast_to(np.asarray(v, dtype=np.complex128), z.shape).copy()


def fit_piecewise(problem: ApproximationProblem, max_degree: int, samples_per_disk: int = DEFAULT_SAMPLES,
                  premap=None, min_degree: int = 0) -> PolynomialFit:
    """Least-squares fit stopping at the smallest basis degree meeting every tolerance.

    ``max_degree`` bounds the degree of the basis polynomial A.  If no degree up
    to it meets all tolerances, the degree with the smallest worst
    achieved/requested ratio is returned with failure flags.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    if premap is None:
        premap = default_premap(problem)
    P = len(problem)
    zs, bs, owner = [], [], []
    for i, piece in enumerate(problem.pieces):
        z = piece.disk.boundary(samples_per_disk)
        b = _eval_target(piece.target, z)
        if not np.all(np.isfinite(b)):
            raise ArithmeticError(f"target of piece {piece.name or i} is not finite on its boundary")
        zs.append(z)
        bs.append(b)
        owner.append(np.full(samples_per_disk, i))
    z = np.concatenate(zs)
    b = np.concatenate(bs)
    x = np.asarray(premap(z), dtype=np.complex128)
    if not np.all(np.isfinite(x)):
        raise ArithmeticError("premap overflows on the sample set")
    M = z.size
    # each piece carries equal total weight
    sw = np.full(M, 1.0 / math.sqrt(P * samples_per_disk))
    tols = np.array([p.tol for p in problem.pieces])
    bounds = [(i * samples_per_disk, (i + 1) * samples_per_disk) for i in range(P)]

    n = max_degree
    Q = np.empty((n + 1, M), dtype=np.complex128)   # rows: weighted basis vectors
    H = np.zeros((n + 1, max(n, 1)), dtype=np.complex128)
    coeffs = np.zeros(n + 1, dtype=np.complex128)
    nrm = float(np.linalg.norm(sw))
    Q[0] = sw / nrm
    q0 = 1.0 / nrm
    sb = sw * b
    res = b.copy()
    history = np.full((n + 1, P), np.inf)

    def record(k):
        c = np.vdot(Q[k], sb)
        coeffs[k] = c
        res[:] -= c * Q[k] / sw
        for i, (lo, hi) in enumerate(bounds):
            history[k, i] = np.max(np.abs(res[lo:hi]))

    record(0)
    best = 0
    hnorm = 0.0
    stop = None
    if np.all(history[0] <= tols) and min_degree <= 0:
        stop = 0
    k = 0
    while stop is None and k < n:
        v = x * Q[k]
        for _ in range(2):
            hcol = (v.conj() @ Q[: k + 1].T).conj()
            v -= hcol @ Q[: k + 1]
            H[: k + 1, k] += hcol
        beta = float(np.linalg.norm(v))
        hnorm = max(hnorm, float(np.max(np.abs(H[: k + 1, k]))), beta)
        if beta <= 1e-14 * max(hnorm, 1.0):
            diag = {"basis_degree": k, "subdiagonal": beta, "max_abs_H": hnorm,
                    "samples": M, "worst_ratio": float(np.max(history[best] / tols))}
            raise SingularFitError("Arnoldi breakdown before tolerance was met", diag)
        H[k + 1, k] = beta
        Q[k + 1] = v / beta
        k += 1
        record(k)
        if np.max(history[k] / tols) < np.max(history[best] / tols):
            best = k
        if k >= min_degree and np.all(history[k] <= tols):
            stop = k
    if stop is None:
        stop = best
    m = stop
    tail = Q[max(0, m - 4): m + 1]
    orth = float(np.max(np.abs(tail.conj() @ Q[: m + 1].T - np.eye(m + 1)[max(0, m - 4): m + 1])))
    sub = np.abs(np.diag(H[1: m + 1, :m])) if m > 0 else np.array([1.0])
    diag = {
        "basis_degree": m,
        "degree": m * int(getattr(premap, "power", 1)),
        "samples_per_disk": samples_per_disk,
        "min_subdiagonal": float(sub.min()),
        "max_abs_H": float(np.max(np.abs(H[: m + 1, :m]))) if m > 0 else 0.0,
        "orthogonality_loss": orth,
        "coefficient_norm": float(np.linalg.norm(coeffs[: m + 1])),
        "premap": premap,
    }
    poly = ArnoldiPolynomial(premap, H[: m + 1, :m].copy(), coeffs[: m + 1].copy(), q0)
    achieved = history[m].copy()
    return PolynomialFit(poly, achieved, tols, achieved <= tols, diag, history[: k + 1].copy(),
                         [p.name for p in problem.pieces])


# ---------------------------------------------------------------------------
# certification


@dataclass
class CertifiedErrors:
    errors: np.ndarray
    raw_max: np.ndarray
    requested: np.ndarray
    samples_per_disk: int
    safety: float

    @property
    def success(self) -> np.ndarray:
        return self.errors <= self.requested

    @property
    def ok(self) -> bool:
        return bool(np.all(self.success))


def certify_sup_error(fit, problem: ApproximationProblem, density: int = CERT_DENSITY,
                      safety: float = CERT_SAFETY, samples_per_disk: int | None = None) -> CertifiedErrors:
    """Re-measure boundary errors on an independent, denser sample set.

    The new samples sit at half-step offsets, so none coincide with the fit's
    samples; the maximum is inflated by ``safety``.
    """
    base = samples_per_disk or fit.diagnostics.get("samples_per_disk", DEFAULT_SAMPLES)
    n = base * density
    raw = []
    for piece in problem.pieces:
        z = piece.disk.boundary(n, offset=0.5)
        err = np.abs(fit(z) - _eval_target(piece.target, z))
        raw.append(float(np.max(err)) if np.all(np.isfinite(err)) else math.inf)
    raw = np.array(raw)
    return CertifiedErrors(raw * safety, raw, np.array([p.tol for p in problem.pieces]), n, safety)


def interior_errors(fit, problem: ApproximationProblem, n: int = 1000, seed: int = 0) -> np.ndarray:
    """Max error over random interior samples of each disk."""
    rng = np.random.default_rng(seed)
    out = []
    for piece in problem.pieces:
        z = piece.disk.interior(n, rng)
        out.append(float(np.max(np.abs(fit(z) - _eval_target(piece.target, z)))))
    return np.array(out)
