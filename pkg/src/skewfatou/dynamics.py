"""Skew-product maps F(z, w) = (f(z) + w*h, g(w)), orbits and their classification."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import W, Expr

WH_OF_Z = "wh_of_z"
WH_OF_ZW = "wh_of_zw"

DEFAULT_ESCAPE_RADIUS = 1e6
DEFAULT_BOUND = 1e3
DEFAULT_WINDOW = 5
DEFAULT_STORAGE_CAP = 100_000


@dataclass(frozen=True)
class SkewProduct:
    """F(z, w) = (f(z) + w*h(z[, w]), g(w)).

    ``h`` may be any object with an ``evaluate``-style call ``h(z, w)``; the
    construction module plugs in high-degree polynomials this way.
    """

    f: Expr
    g: Expr
    h: object
    form: str = WH_OF_Z
    invariant_fiber: bool = True

    def __post_init__(self):
        if self.form not in (WH_OF_Z, WH_OF_ZW):
            raise ValueError(f"unknown form {self.form!r}")
        if getattr(self.f, "uses", None) and self.f.uses(W):
            raise ValueError("f must not depend on w")
        if getattr(self.g, "uses", None) and self.g.uses("z"):
            raise ValueError("g must not depend on z")
        if self.form == WH_OF_Z and getattr(self.h, "uses", None) and self.h.uses(W):
            raise ValueError("form wh_of_z requires h independent of w")
        if self.invariant_fiber:
            g0 = complex(self.g(0.0, 0.0))
            if abs(g0) > 1e-12:
                raise ValueError(f"invariant fiber requires g(0)=0, got {g0}")

    def _h(self, z, w):
        if self.form == WH_OF_Z:
            return self.h(z)
        return self.h(z, w)

    def __call__(self, z, w):
        """One step; works for scalars and arrays."""
        with np.errstate(over="ignore", invalid="ignore"):
            fz = self.f(z)
            hz = self._h(z, w)
            return fz + w * hz, self.g(0.0, w)

    step = __call__


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    ESCAPED = "escaped"
    OVERFLOWED = "overflowed"


@dataclass
class OrbitRecord:
    start: tuple
    k: np.ndarray
    z: np.ndarray
    w: np.ndarray
    termination: Termination
    stop_step: int | None = None
    escape_radius: float | None = None

    def __len__(self):
        return len(self.k)

    @property
    def last_step(self) -> int:
        return int(self.k[-1])

    def describe_termination(self) -> str:
        t = self.termination
        if t is Termination.ESCAPED:
            return f"escaped(radius={self.escape_radius!r}, step={self.stop_step})"
        if t is Termination.OVERFLOWED:
            return f"overflowed(step={self.stop_step})"
        return "completed"


def iterate(F: SkewProduct, start, steps: int, escape_radius: float | None = None,
            storage_cap: int = DEFAULT_STORAGE_CAP) -> OrbitRecord:
    """Iterate F from ``start`` for up to ``steps`` steps.

    Stops early when |z| exceeds ``escape_radius`` (that iterate is kept) or
    when a non-finite value appears (that iterate is dropped).  Beyond
    ``storage_cap`` stored points the record keeps a geometrically thinning
    subset of indices.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    z, w = np.complex128(start[0]), np.complex128(start[1])
    ks, zs, ws = [0], [z], [w]
    next_keep = storage_cap
    term, stop = Termination.COMPLETED, None
    for k in range(1, steps + 1):
        z, w = F(z, w)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)
                and math.isfinite(w.real) and math.isfinite(w.imag)):
            term, stop = Termination.OVERFLOWED, k
            break
        escaped = escape_radius is not None and abs(z) > escape_radius
        if k < storage_cap or k >= next_keep or escaped or k == steps:
            ks.append(k)
            zs.append(z)
            ws.append(w)
            if k >= next_keep:
                next_keep = max(k + 1, int(math.ceil(k * 1.01)))
        if escaped:
            term, stop = Termination.ESCAPED, k
            break
    return OrbitRecord(
        start=(complex(start[0]), complex(start[1])),
        k=np.array(ks, dtype=np.int64),
        z=np.array(zs, dtype=np.complex128),
        w=np.array(ws, dtype=np.complex128),
        termination=term,
        stop_step=stop,
        escape_radius=escape_radius,
    )


def fiber_orbit(f: Expr, z0, steps: int) -> list:
    """Orbit of the one-variable map f; truncated at the first non-finite value."""
    z = np.complex128(z0)
    out = [z]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            z = f(z)
            if not np.isfinite(z):
                break
            out.append(z)
    return out


class OrbitLabel(str, enum.Enum):
    ESCAPING = "Escaping"
    BOUNDED = "Bounded"
    OSCILLATING = "Oscillating"
    UNDETERMINED = "Undetermined"


@dataclass
class OrbitClass:
    label: OrbitLabel
    max_abs_z: float
    escape_step: int | None = None
    subsequence: list = field(default_factory=list)


def classify_orbit(record: OrbitRecord, escape_radius: float = DEFAULT_ESCAPE_RADIUS,
                   bound: float = DEFAULT_BOUND, window: int = DEFAULT_WINDOW) -> OrbitClass:
    """Finite-horizon surrogate for escaping / bounded / oscillating behavior."""
    if not escape_radius > bound > 0:
        raise ValueError("need escape_radius > bound > 0")
    az = np.abs(record.z)
    max_z = float(az.max())
    above = np.nonzero(az > escape_radius)[0]
    first_escape = int(record.k[above[0]]) if len(above) else None

    tail = az[-(window + 1):]
    if az[-1] > escape_radius and np.all(np.diff(tail) > 0):
        return OrbitClass(OrbitLabel.ESCAPING, max_z, first_escape)

    if record.termination is Termination.COMPLETED:
        norms = np.sqrt(az ** 2 + np.abs(record.w) ** 2)
        if norms.max() <= bound:
            return OrbitClass(OrbitLabel.BOUNDED, max_z)

    if len(above):
        later = np.nonzero(az[above[0]:] < bound)[0]
        if len(later):
            subseq = [int(record.k[i]) for i in above]
            return OrbitClass(OrbitLabel.OSCILLATING, max_z, first_escape, subseq)
    return OrbitClass(OrbitLabel.UNDETERMINED, max_z, first_escape)


@dataclass
class EscapingSubsequence:
    indices: list
    truncated: bool


def select_escaping_subsequence(orbit: Sequence) -> EscapingSubsequence:
    """Greedy running-maximum indices n_0 = 0 < n_1 < ... of an orbit window.

    ``truncated`` is set when the window ends without a new record modulus
    after the last selected index.
    """
    mods = [abs(complex(v)) for v in orbit]
    if not mods:
        raise ValueError("empty orbit")
    idx = [0]
    best = mods[0]
    for m in range(1, len(mods)):
        if mods[m] > best:
            idx.append(m)
        best = max(best, mods[m])
    return EscapingSubsequence(idx, truncated=idx[-1] != len(mods) - 1)


def write_orbit_csv(record: OrbitRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(orbit_csv_text(record))


def orbit_csv_text(record: OrbitRecord) -> str:
    lines = ["k,re_z,im_z,re_w,im_w"]
    for k, z, w in zip(record.k, record.z, record.w):
        lines.append(f"{int(k)},{z.real:.17g},{z.imag:.17g},{w.real:.17g},{w.imag:.17g}")
    return "\n".join(lines) + "\n"


def read_orbit_csv(path):
    """Parse an orbit CSV back into (k, z, w) arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["k", "re_z", "im_z", "re_w", "im_w"]:
        raise ValueError("bad orbit CSV header")
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return data[:, 0].astype(np.int64), data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4]


def escape_steps(F: SkewProduct, z0: np.ndarray, w0, maxiter: int, radius: float) -> np.ndarray:
    """Vectorized escape time: first k with |z_k| > radius (or non-finite), else maxiter."""
    z = np.array(z0, dtype=np.complex128).ravel()
    w = np.broadcast_to(np.asarray(w0, dtype=np.complex128), z.shape).copy()
    out = np.full(z.shape, maxiter, dtype=np.int64)
    active = np.arange(z.size)
    with np.errstate(over="ignore", invalid="ignore"):
        done = ~(np.abs(z) <= radius)
        out[done] = 0
        active = active[~done]
        za, wa = z[active], w[active]
        for k in range(1, maxiter + 1):
            if active.size == 0:
                break
            za, wa = F(za, wa)
            gone = ~(np.abs(za) <= radius)
            if np.any(gone):
                out[active[gone]] = k
                keep = ~gone
                active, za, wa = active[keep], za[keep], wa[keep]
    return out.reshape(np.shape(z0))
