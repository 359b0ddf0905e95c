"""Command-line front end: ``skewfatou <command> [--config FILE] [flags]``.

Every command writes ``report.txt`` into the output directory plus its data
files; the exit status is nonzero iff an asserted invariant failed.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import PARAMS, ConfigError, ExperimentConfig
from .criteria import RhoSequence, check_containment, derive_rho_geometric, derive_rho_superattracting, \
    estimate_order, series_test, shadowing_check
from .dynamics import OrbitLabel, SkewProduct, classify_orbit, iterate, write_orbit_csv
from .expr import W, ExprSyntaxError, StructuralError
from .report import Report, construction_text, fit_text


def _skew(cfg) -> SkewProduct:
    return SkewProduct(cfg.get("f"), cfg.get("g"), cfg.get("h"), form=cfg.get("form"))


def _threads(cfg) -> int:
    return cfg.threads or os.cpu_count() or 1


# ---------------------------------------------------------------------------
# commands


def cmd_orbit(cfg, rep: Report, out: str) -> None:
    F = _skew(cfg)
    z0, w0, steps = cfg.get("z0"), cfg.get("w0"), cfg.get("steps")
    rec = iterate(F, (z0, w0), steps, escape_radius=cfg.get("escape_radius"))
    write_orbit_csv(rec, os.path.join(out, "orbit_0.csv"))
    cls = classify_orbit(rec, cfg.get("classify_radius"), cfg.get("bound"))
    rep.add("z0", z0)
    rep.add("w0", w0)
    rep.add("steps", steps)
    rep.add("rows", len(rec))
    rep.add("termination", rec.describe_termination())
    rep.add("label", cls.label.value)
    rep.add("max_abs_z", cls.max_abs_z)
    rep.add("orbit_file", "orbit_0.csv")
    rep.check("orbit_reproducible", np.array_equal(iterate(F, (z0, w0), steps, cfg.get("escape_radius")).z, rec.z))


def cmd_classify_grid(cfg, rep: Report, out: str) -> None:
    from .render import pixel_grid
    F = _skew(cfg)
    W_, H_ = cfg.get("size")
    pts = pixel_grid(cfg.get("viewport"), W_, H_)
    w0, steps = cfg.get("w0"), cfg.get("steps")
    R, B = cfg.get("classify_radius"), cfg.get("bound")

    def row(i):
        return [classify_orbit(iterate(F, (z, w0), steps), R, B).label for z in pts[i]]

    with ThreadPoolExecutor(max_workers=_threads(cfg)) as pool:
        labels = list(pool.map(row, range(H_)))
    counts = {lab.value: 0 for lab in OrbitLabel}
    for r in labels:
        for lab in r:
            counts[lab.value] += 1
    rep.add("size", f"{W_}x{H_}")
    rep.add("viewport", cfg.params["viewport"])
    rep.add("w0", w0)
    for k, v in counts.items():
        rep.add(f"count_{k}", v)
    code = {OrbitLabel.ESCAPING: "E", OrbitLabel.BOUNDED: "B", OrbitLabel.OSCILLATING: "O",
            OrbitLabel.UNDETERMINED: "U"}
    rep.section("grid")
    for r in labels:
        rep.lines.append("".join(code[lab] for lab in r))
    rep.check("all_points_classified", sum(counts.values()) == W_ * H_)


def cmd_example4(cfg, rep: Report, out: str) -> None:
    from .gallery import example_bisect_bounded, example_sign_flip, example_thresholds, real_orbit, \
        polynomial_example_map
    lam, x0, delta = cfg.get("lambda"), cfg.get("x0"), cfg.get("delta")
    inst = example_thresholds(lam, x0, delta)
    rep.add("N", inst.N)
    rep.add("n0", inst.n0)
    rep.add("y0", inst.y0)
    flip = example_sign_flip(inst)
    rep.add("x_sequence", flip.xs)
    rep.check("x_k_positive_then_flip", flip.ok, f"x_{inst.n0 + 1} = {flip.flip_value!r}")
    bis = example_bisect_bounded(inst, cfg.get("tolerance"))
    rep.add("bracket_lower", bis.lower)
    rep.add("bracket_upper", bis.upper)
    rep.add("bracket_width", bis.width)
    rep.add("bisection_steps", bis.steps)
    rep.add("refined_lower", bis.fine_lower)
    rep.add("refined_upper", bis.fine_upper)
    rep.add("y_tilde", bis.y_tilde)
    rep.add(f"x_{inst.n0 + 1}_at_y_tilde", bis.x_at_y_tilde)
    rep.check("bracket_width_below_tolerance", bis.width <= cfg.get("tolerance"))
    rep.check("y_tilde_in_open_interval", 0 < bis.y_tilde < inst.y0)
    steps = cfg.get("steps")
    F = polynomial_example_map(lam)
    rec = iterate(F, (x0, bis.y_tilde), steps)
    write_orbit_csv(rec, os.path.join(out, "orbit_ytilde.csv"))
    cap = x0 ** (2 ** inst.N)
    mz = float(np.max(np.abs(rec.z)))
    rep.add("bounded_horizon", steps)
    rep.add("bounded_max_abs_z", mz)
    rep.add("bounded_cap", cap)
    rep.check("y_tilde_orbit_bounded", rec.last_step == steps and mz <= cap, rec.describe_termination())
    cls = classify_orbit(rec, escape_radius=cap * 10, bound=cap)
    rep.add("y_tilde_orbit_label", cls.label.value)
    y_esc = bis.y_tilde + cfg.get("offset")
    x_esc = real_orbit(lam, x0, y_esc, inst.n0 + 1)[-1][0]
    rep.add("escape_side_y", y_esc)
    rep.add(f"escape_side_x_{inst.n0 + 1}", x_esc)
    rep.check("escape_side_nonpositive", x_esc <= 0)


def cmd_baker_bulge(cfg, rep: Report, out: str) -> None:
    from .gallery import make_baker_family
    from .probe import bulging_probe, bulging_text
    baker = make_baker_family(cfg.get("T"), cfg.get("p"))
    F = SkewProduct(baker.f, cfg.get("g"), cfg.get("h"))
    delta, steps = cfg.get("delta"), cfg.get("steps")
    rep.add("baker_fixed_point", baker.z0)
    rep.add("baker_multiplier", baker.multiplier)
    sh = shadowing_check(F, baker, cfg.get("z0"), cfg.get("w0"), delta, steps)
    rep.add("start_translate", sh.l)
    rep.add("max_error", float(np.max(sh.errors)))
    rep.add("final_abs_w", float(sh.w_abs[-1]))
    rep.add("left_tube_at", sh.left_tube_at if sh.left_tube_at is not None else "never")
    rep.add("tube_ok", sh.tube_ok)
    rep.add("w_to_zero", sh.w_to_zero)
    rep.add("shadows", sh.shadows)
    rep.check("induction_inequality", sh.induction_ok)
    rec = iterate(F, (cfg.get("z0"), cfg.get("w0")), steps)
    write_orbit_csv(rec, os.path.join(out, "orbit_0.csv"))
    bp = bulging_probe(F, baker, cfg.get("z_center"), cfg.get("z_radius"), cfg.get("w_radius"), delta, steps,
                       cfg.get("grid"))
    rep.extend(bulging_text(bp))
    held = all(s.report.induction_ok for s in bp.samples if s.report is not None)
    rep.check("probe_induction_inequality", held)


def cmd_runge_build(cfg, rep: Report, out: str) -> None:
    from .construction import run_construction
    f, g = cfg.get("f"), cfg.get("g")
    run = run_construction(f, g, cfg.get("z0"), K=cfg.get("K"), max_degree=cfg.get("max_degree"),
                           theta=cfg.get("theta"), window=cfg.get("window"),
                           samples_per_disk=cfg.get("samples"), trials=cfg.get("trials"),
                           seed=cfg.effective_seed())
    rep.extend(construction_text(run))
    geo = run.geometry
    rep.check("geometry_invariants", all(c.passed for c in geo.checks))
    for st in run.stages:
        if st.fit is not None:
            name = f"fit_{st.k}.txt"
            with open(os.path.join(out, name), "w") as fh:
                fh.write(fit_text(st))
        if st.complete:
            rep.check(f"stage_{st.k}_properties", st.passed)
        else:
            msg = st.message or "incomplete"
            if cfg.get("strict"):
                rep.check(f"stage_{st.k}_complete", False, msg)
            else:
                rep.flag(f"stage_{st.k}", msg)
    rep.check("stage_1_complete", len(run.stages) > 1 and run.stages[1].complete)
    if run.assembled is not None:
        rep.check("assembled_bounds", run.assembled.passed)
    for r in run.dichotomy:
        rep.check(f"dichotomy_{r.k}", r.passed)


def cmd_series_test(cfg, rep: Report, out: str) -> None:
    h, g, K = cfg.get("h"), cfg.get("g"), cfg.get("K")
    if g is None:
        rho = RhoSequence.geometric(cfg.get("rho0"), cfg.get("ratio"), K)
    else:
        geometric = abs(complex(g.diff(W)(0.0, 0.0))) > 1e-12
        rho = (derive_rho_geometric(g, cfg.get("probe"), K=K) if geometric
               else derive_rho_superattracting(g, cfg.get("probe"), K=K))
        rep.check("rho_forward_containment", check_containment(g, rho))
    res = series_test(h, rho, cfg.get("z0"), cfg.get("T"), cfg.get("delta"), K)
    rep.add("rho_kind", rho.kind)
    for k, v in sorted(rho.params.items()):
        rep.add(f"rho_{k}", v)
    rep.add("K", K)
    rep.add("verdict", res.verdict)
    rep.add("partial_sum", float(res.partial_sums[-1]))
    rep.add("limit_estimate", res.limit_estimate if res.limit_estimate is not None else "none")
    rep.add("last_ratio", float(res.ratios[-1]) if len(res.ratios) else "none")
    rep.add("overflow", res.overflow)


def cmd_order(cfg, rep: Report, out: str) -> None:
    lo, hi = cfg.get("ladder_min"), cfg.get("ladder_max")
    ladder = [2.0 ** j for j in range(lo, hi + 1)]
    est = estimate_order(cfg.get("h"), cfg.get("r2"), ladder, cfg.get("diagonal"))
    rep.add("ladder", ladder)
    rep.add("log_M", est.log_M)
    rep.add("fit_from_index", est.fit_from)
    rep.add("estimate", est.estimate)
    rep.check("log_modulus_finite", bool(np.all(np.isfinite(est.log_M)) or est.degenerate))


def cmd_certify(cfg, rep: Report, out: str) -> None:
    from .probe import certificate_orbits, certificate_text, certify_non_normality, reverify_certificate
    F = _skew(cfg)
    cert = certify_non_normality(F, cfg.get("z0"), cfg.get("scales"), cfg.get("horizon"),
                                 bound=cfg.get("bound"), e0=cfg.get("e0"), threads=_threads(cfg))
    with open(os.path.join(out, "certificate_0.txt"), "w") as fh:
        fh.write(certificate_text(cert))
    for name, text in certificate_orbits(cert).items():
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)
    rep.add("verdict", cert.verdict)
    rep.add("certificate_file", "certificate_0.txt")
    rep.check("witnesses_reverify", reverify_certificate(cert, F))


def cmd_render(cfg, rep: Report, out: str) -> None:
    from .render import render_slice, write_pgm
    F = _skew(cfg)
    img = render_slice(F, cfg.get("viewport"), cfg.get("w_slice"), cfg.get("size"), cfg.get("maxiter"),
                       cfg.get("radius"), threads=_threads(cfg))
    write_pgm(img, os.path.join(out, "image_0.pgm"))
    rep.add("size", f"{img.width}x{img.height}")
    rep.add("viewport", cfg.params["viewport"])
    rep.add("w_slice", img.w_slice)
    rep.add("maxiter", img.maxiter)
    rep.add("pixels_at_maxiter", int(np.sum(img.steps == img.maxiter)))
    rep.add("image_file", "image_0.pgm")
    rep.check("steps_in_range", bool(np.all((img.steps >= 0) & (img.steps <= img.maxiter))))


COMMANDS = {
    "orbit": cmd_orbit,
    "classify-grid": cmd_classify_grid,
    "example4": cmd_example4,
    "baker-bulge": cmd_baker_bulge,
    "runge-build": cmd_runge_build,
    "series-test": cmd_series_test,
    "order": cmd_order,
    "certify": cmd_certify,
    "render": cmd_render,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skewfatou", description="Skew-product Fatou/Julia experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind, table in PARAMS.items():
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="INI-style config file; flags override its values")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--output", "--out", dest="output", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker pool size (0: machine parallelism)")
        sp.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
        for key, (_, default, help_) in table.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"{help_} (default: {default})")
    return ap


def load_config(args) -> ExperimentConfig:
    overrides = {k: v for k, v in vars(args).items()
                 if k in PARAMS[args.command] and v is not None}
    for k in ("seed", "output", "threads"):
        if getattr(args, k) is not None:
            overrides[k] = getattr(args, k)
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        cfg = ExperimentConfig.from_text(text, overrides)
        if cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match command {args.command!r}")
        return cfg
    top = {k: overrides.pop(k) for k in ("seed", "output", "threads") if k in overrides}
    return ExperimentConfig(args.command, overrides, int(top.get("seed", 0)), str(top.get("output", ".")),
                            int(top.get("threads", 0)))


def run(cfg: ExperimentConfig) -> tuple:
    """Execute one experiment; returns (exit status, report)."""
    cfg.validate()
    os.makedirs(cfg.output, exist_ok=True)
    rep = Report(cfg.kind)
    rep.add("seed", cfg.effective_seed())
    COMMANDS[cfg.kind](cfg, rep, cfg.output)
    rep.write(cfg.output)
    return (0 if rep.ok else 1), rep


_NEGATIVE_VALUE = re.compile(r"^-[0-9.]")


def _join_negative_values(argv):
    """Let ``--viewport -2,-2,2,2`` through argparse by rewriting it as ``--viewport=-2,-2,2,2``."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    try:
        cfg = load_config(args)
        if args.dump_config:
            sys.stdout.write(cfg.to_text())
            return 0
        status, rep = run(cfg)
    except (ConfigError, ExprSyntaxError) as exc:
        print(f"skewfatou: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, StructuralError, OSError) as exc:
        print(f"skewfatou: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(rep.body())
    return status


if __name__ == "__main__":
    sys.exit(main())
