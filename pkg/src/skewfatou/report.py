"""Plain-text reports with a stable key order; the timestamp lives only on the first line."""

from __future__ import annotations

import datetime as _dt
import math
import os

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        c = complex(v)
        return f"{c.real!r}{'+' if c.imag >= 0 or math.isnan(c.imag) else '-'}{abs(c.imag)!r}i"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt(x) for x in v) + "]"
    return str(v)


class Report:
    def __init__(self, command: str):
        self.command = command
        self.lines = []
        self.failures = []

    def section(self, name: str) -> None:
        self.lines.append(f"[{name}]")

    def add(self, key: str, value) -> None:
        self.lines.append(f"{key} = {fmt(value)}")

    def extend(self, text: str) -> None:
        self.lines.extend(text.rstrip("\n").splitlines())

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        """Asserted invariant: recorded as PASS/FAIL, failures make the exit status nonzero."""
        passed = bool(passed)
        self.lines.append(f"check {name} = {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else ""))
        if not passed:
            self.failures.append(name)
        return passed

    def flag(self, name: str, detail: str) -> None:
        """Reported shortfall that is not an asserted invariant."""
        self.lines.append(f"flag {name} = {detail}")

    @property
    def ok(self) -> bool:
        return not self.failures

    def body(self) -> str:
        out = [f"command = {self.command}"] + self.lines
        out.append(f"status = {'ok' if self.ok else 'failed'}")
        if self.failures:
            out.append(f"failed_checks = {', '.join(self.failures)}")
        return "\n".join(out) + "\n"

    def text(self, timestamp: str | None = None) -> str:
        ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return f"# skewfatou report {ts}\n" + self.body()

    def write(self, directory: str, name: str = "report.txt") -> str:
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(self.text())
        return path


def construction_text(run) -> str:
    """Structured description of a construction run: geometry, stages, assembly, dichotomy."""
    geo = run.geometry
    L = ["[geometry]",
         f"n = {fmt(geo.n)}",
         f"z_n = {fmt(geo.z_n)}",
         f"delta_tilde = {fmt(geo.delta_tilde)}",
         f"delta = {fmt(geo.delta)}",
         f"theta = {fmt(geo.theta)}"]
    for c in geo.checks:
        L.append(f"geometry {c.name} = {'PASS' if c.passed else 'FAIL'} margin={c.margin:.6g}")
    for st in run.stages:
        L.append(f"[stage {st.k}]")
        L.append(f"status = {st.status}")
        if st.message:
            L.append(f"message = {st.message}")
        L.append(f"n_k = {geo.n[st.k]}")
        L.append(f"delta_tilde_k = {fmt(geo.delta_tilde[st.k])}")
        L.append(f"delta_k = {fmt(st.delta)}")
        L.append(f"R_k = {fmt(st.R)}")
        if st.w is not None:
            L.append(f"w_k = {fmt(st.w)}")
            L.append(f"w_tilde_k = {fmt(st.w_tilde)}")
        if st.constants is not None:
            L.append(f"Delta_center = {fmt(st.Delta.center)}")
            L.append(f"Delta_tilde_center = {fmt(st.Delta_tilde.center)}")
            L.append(f"constant_Delta = {fmt(st.constants[0])}")
            L.append(f"constant_Delta_tilde = {fmt(st.constants[1])}")
            L.append(f"required_tolerance = {fmt(st.tolerance)}")
        if st.fit is not None:
            L.append(f"fit_basis_degree = {st.fit.basis_degree}")
            L.append(f"fit_degree = {st.fit.degree}")
            L.append(f"fit_achieved = {fmt(st.fit.achieved)}")
            L.append(f"fit_requested = {fmt(st.fit.requested)}")
            L.append(f"certified_errors = {fmt(st.certified.errors)}")
        if st.stability is not None:
            s = st.stability
            L.append(f"stability_trials = {s.trials}")
            L.append(f"stability_max_displacement = {fmt(s.max_displacement)}")
            L.append(f"stability_limit = {fmt(s.limit)}")
        for key in sorted(st.info):
            if key != "premap":
                L.append(f"info_{key} = {fmt(st.info[key])}")
        for c in st.checks:
            L.append(f"property {c.name} = {'PASS' if c.passed else 'FAIL'} value={c.value:.6g} "
                     f"bound={c.bound:.6g} margin={c.margin:.6g}" + (f" [{c.note}]" if c.note else ""))
    if run.assembled is not None:
        L.append("[assembled]")
        L.append(f"K = {run.assembled.K}")
        for c in run.assembled.checks:
            L.append(f"assembled {c.name} = {'PASS' if c.passed else 'FAIL'} value={c.value:.6g} "
                     f"bound={c.bound:.6g}")
    L.append("[dichotomy]")
    L.append("k | z_{n_k+1}(w_k) | z_{n_k+1}(w~_k) | |g^{n_k+1}(w_k)| | |g^{n_k+1}(w~_k)| | fiber_exact | pass")
    for r in run.dichotomy:
        L.append(f"{r.k} | {fmt(r.escape_value)} | {fmt(r.bounded_value)} | {r.g_escape:.6g} | "
                 f"{r.g_bounded:.6g} | {fmt(r.fiber_exact)} | {fmt(r.passed)}")
    return "\n".join(L) + "\n"


def fit_text(stage) -> str:
    """Full description of one stage increment: premap, Hessenberg matrix and coefficients."""
    fit = stage.fit
    p = fit.poly
    pm = p.premap
    L = [f"[fit stage {stage.k}]",
         f"premap = {type(pm).__name__}",
         f"premap_center = {fmt(complex(pm.center))}",
         f"premap_scale = {fmt(float(pm.scale))}",
         f"premap_power = {int(getattr(pm, 'power', 1))}",
         f"basis_degree = {p.basis_degree}",
         f"degree = {p.degree}",
         f"q0 = {fmt(p.q0)}",
         f"achieved = {fmt(fit.achieved)}",
         f"requested = {fmt(fit.requested)}",
         "[coefficients]"]
    L.extend(f"c{j} = {fmt(c)}" for j, c in enumerate(p.coeffs))
    L.append("[hessenberg]")
    H = p.H
    for col in range(H.shape[1]):
        L.append(f"col{col} = " + " ".join(fmt(H[r, col]) for r in range(col + 2)))
    return "\n".join(L) + "\n"
