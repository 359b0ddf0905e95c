"""Experiment configuration: a parameter table per experiment kind, config files, and overrides.

Config files are INI-style (``[experiment]`` with kind/seed/output/threads and
``[params]`` with the kind's parameters).  Values are kept as text and converted
on access, so a config round-trips through ``to_text``/``from_text`` losslessly.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .expr import W, Z, Expr, ExprSyntaxError, parse_expr

SEED_ENV = "SKEWFATOU_SEED"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


# kind -> {key: (type, default, help)}
_F = ("expr_z", "poly(0,0,1)", "fiber map f(z)")
_G = ("expr_w", "poly(0,0.5)", "base map g(w) with g(0)=0")
_H = ("expr_h", "poly(1)", "perturbation h(z) or h(z,w)")
_FORM = ("form", "wh_of_z", "wh_of_z or wh_of_zw")

PARAMS = {
    "orbit": {
        "f": _F, "g": _G, "h": _H, "form": _FORM,
        "z0": ("complex", "2", "start z"),
        "w0": ("complex", "0.001", "start w"),
        "steps": ("int", "20", "iteration count"),
        "escape_radius": ("optfloat", "none", "stop once |z| exceeds this (none: never)"),
        "classify_radius": ("float", "1e6", "escape radius R for classification"),
        "bound": ("float", "1e3", "bounded cap B for classification"),
    },
    "classify-grid": {
        "f": _F, "g": _G, "h": _H, "form": _FORM,
        "w0": ("complex", "0", "w value for every start"),
        "viewport": ("viewport", "-2,-2,2,2", "xmin,ymin,xmax,ymax"),
        "size": ("size", "32x32", "grid WxH"),
        "steps": ("int", "60", "iteration count"),
        "classify_radius": ("float", "1e6", "escape radius R"),
        "bound": ("float", "1e3", "bounded cap B"),
    },
    "example4": {
        "lambda": ("float", "0.5", "multiplier of g(w) = lambda*w"),
        "x0": ("float", "5", "real start x0 > 1"),
        "delta": ("float", "0.01", "upper bound for y0"),
        "steps": ("int", "200", "horizon for the bounded-orbit check"),
        "tolerance": ("float", "1e-15", "bisection width"),
        "offset": ("float", "1e-14", "escape-side witness offset above y~0"),
    },
    "baker-bulge": {
        "T": ("complex", "2*pi*i", "period of p"),
        "p": ("expr_z", "exp(-z) - 1", "T-periodic p(z)"),
        "g": ("expr_w", "w/2", "base map g(w)"),
        "h": ("expr_h", "1", "perturbation h(z)"),
        "z0": ("complex", "0.1", "shadowing start z"),
        "w0": ("complex", "0.01", "shadowing start w"),
        "delta": ("float", "0.5", "tube radius"),
        "steps": ("int", "50", "horizon"),
        "z_center": ("complex", "0.1", "probe z-disk centre"),
        "z_radius": ("float", "0.2", "probe z-disk radius"),
        "w_radius": ("float", "0.01", "probe w-disk radius"),
        "grid": ("int", "5", "probe grid side"),
    },
    "runge-build": {
        "f": ("expr_z", "z^2", "fiber map f(z)"),
        "g": ("expr_w", "w/2", "base map g(w)"),
        "z0": ("complex", "2", "escaping start"),
        "K": ("int", "2", "last stage"),
        "max_degree": ("int", "1500", "basis degree cap per fit"),
        "theta": ("float", "0.5", "shrink factor for delta~"),
        "window": ("int", "8", "fiber orbit window"),
        "trials": ("int", "64", "stability trials"),
        "samples": ("int", "4096", "boundary samples per disk for fitting"),
        "strict": ("bool", "false", "nonzero exit when a stage is flagged incomplete"),
    },
    "series-test": {
        "h": ("expr_h", "1", "perturbation h(z)"),
        "g": ("optexpr_w", "none", "derive rho from g (none: use rho0, ratio)"),
        "probe": ("float", "0.1", "probe radius for rho derivation"),
        "rho0": ("float", "0.1", "geometric rho_0"),
        "ratio": ("float", "0.5", "geometric rho ratio"),
        "z0": ("complex", "0", "centre of the first bidisk"),
        "T": ("complex", "1", "translation"),
        "delta": ("float", "0.5", "bidisk z-radius"),
        "K": ("int", "60", "last term"),
    },
    "order": {
        "h": ("expr_h", "exp(z)", "entire function h"),
        "r2": ("float", "1", "fixed w-radius"),
        "diagonal": ("bool", "false", "use r2 = r"),
        "ladder_min": ("int", "6", "smallest radius exponent (base 2)"),
        "ladder_max": ("int", "14", "largest radius exponent (base 2)"),
    },
    "certify": {
        "f": _F, "g": _G, "h": _H, "form": _FORM,
        "z0": ("complex", "1", "base point on the fiber"),
        "scales": ("floats", "0.1,0.05,0.025", "strictly decreasing scales"),
        "horizon": ("int", "50", "iteration horizon"),
        "e0": ("float", "10", "escape ladder E_j = j*e0"),
        "bound": ("float", "1e3", "bounded cap B"),
    },
    "render": {
        "f": _F, "g": _G, "h": _H, "form": _FORM,
        "w_slice": ("complex", "0", "w value of the slice"),
        "viewport": ("viewport", "-2,-2,2,2", "xmin,ymin,xmax,ymax"),
        "size": ("size", "512x512", "image WxH"),
        "maxiter": ("int", "100", "iteration cap"),
        "radius": ("float", "1e3", "escape radius"),
    },
}

KINDS = tuple(PARAMS)
EXPERIMENT_KEYS = ("kind", "seed", "output", "threads")


def parse_complex(text: str) -> complex:
    """A constant written in the expression grammar (e.g. ``2*pi*i``, ``1e-3``, ``-0.5+2i``)."""
    e = parse_expr(text)
    if e.variables:
        raise ValueError(f"expected a constant, got variables {sorted(e.variables)} in {text!r}")
    return complex(e(0.0, 0.0))


def _expr(text: str, var: str) -> Expr:
    return parse_expr(text, default_var=var)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _viewport(text: str):
    v = tuple(float(x) for x in text.split(","))
    if len(v) != 4:
        raise ValueError("viewport needs four numbers xmin,ymin,xmax,ymax")
    return v


def _size(text: str):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError("size must look like WxH")
    return int(parts[0]), int(parts[1])


def _optional(conv):
    def inner(text):
        return None if text.strip().lower() in ("none", "") else conv(text)
    return inner


CONVERTERS = {
    "expr_z": lambda t: _expr(t, Z),
    "expr_w": lambda t: _expr(t, W),
    "expr_h": lambda t: _expr(t, Z),
    "optexpr_w": _optional(lambda t: _expr(t, W)),
    "form": lambda t: t.strip(),
    "complex": parse_complex,
    "int": int,
    "float": float,
    "optfloat": _optional(float),
    "floats": lambda t: [float(x) for x in t.split(",") if x.strip()],
    "bool": _bool,
    "viewport": _viewport,
    "size": _size,
}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str = "."
    threads: int = 0

    def __post_init__(self):
        if self.kind not in PARAMS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        table = PARAMS[self.kind]
        for k in self.params:
            if k not in table:
                raise ConfigError(f"unknown key {k!r} for kind {self.kind!r}")
        full = {k: spec[1] for k, spec in table.items()}
        full.update({k: str(v) for k, v in self.params.items()})
        self.params = full

    def get(self, key: str):
        kind = PARAMS[self.kind][key][0]
        text = self.params[key]
        try:
            return CONVERTERS[kind](text)
        except ExprSyntaxError as exc:
            err = ConfigError(f"bad value for {key!r}: {exc}")
            err.column = exc.column
            raise err from exc
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc

    def validate(self) -> None:
        for key in self.params:
            self.get(key)

    def effective_seed(self) -> int:
        env = os.environ.get(SEED_ENV)
        if env is not None and env.strip():
            try:
                return int(env)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
        return self.seed

    def to_text(self) -> str:
        lines = ["[experiment]", f"kind = {self.kind}", f"seed = {self.seed}",
                 f"output = {self.output}", f"threads = {self.threads}", "", "[params]"]
        for k in PARAMS[self.kind]:
            lines.append(f"{k} = {self.params[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, overrides: dict | None = None) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if getattr(exc, "errors", None) else None
            raise ConfigError("malformed config line", line=line) from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc.message}", line=getattr(exc, "lineno", None)) from exc
        for sec in cp.sections():
            if sec not in ("experiment", "params"):
                raise ConfigError(f"unknown section [{sec}]", line=_line_of(text, f"[{sec}]"))
        if not cp.has_section("experiment") or "kind" not in cp["experiment"]:
            raise ConfigError("missing [experiment] kind")
        exp = dict(cp["experiment"])
        for k in exp:
            if k not in EXPERIMENT_KEYS:
                raise ConfigError(f"unknown key {k!r} in [experiment]", line=_line_of(text, k))
        kind = exp["kind"].strip()
        if kind not in PARAMS:
            raise ConfigError(f"unknown experiment kind {kind!r}", line=_line_of(text, "kind"))
        params = dict(cp["params"]) if cp.has_section("params") else {}
        for k in params:
            if k not in PARAMS[kind]:
                raise ConfigError(f"unknown key {k!r} for kind {kind!r}", line=_line_of(text, k))
        overrides = overrides or {}
        top = {k: overrides.pop(k) for k in list(overrides) if k in EXPERIMENT_KEYS}
        params.update(overrides)
        try:
            seed = int(top.get("seed", exp.get("seed", 0)))
            threads = int(top.get("threads", exp.get("threads", 0)))
        except ValueError as exc:
            raise ConfigError(f"seed and threads must be integers: {exc}") from exc
        return cls(kind, params, seed, str(top.get("output", exp.get("output", "."))), threads)


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s == key or s.startswith(key + " ") or s.startswith(key + "="):
            return i
    return None
