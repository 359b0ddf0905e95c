"""Expression trees for entire functions of one or two complex variables.

Nodes are immutable dataclasses.  Evaluation works on Python/numpy scalars
and on numpy arrays alike, always in complex double precision.  Overflow is
never hidden: a non-finite value comes back as ``inf``/``nan`` and callers
test it with :func:`is_overflow`.

A small text grammar is provided by :func:`parse_expr`::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' INTEGER)?
    atom    := NUMBER ['i'] | 'i' | 'pi' | 'z' | 'w'
             | 'exp' '(' expr ')'
             | ('poly' | 'polyz' | 'polyw') '(' const (',' const)* ')'
             | '(' expr ')'

``poly(c0, c1, ...)`` is ``c0 + c1*x + ...`` in the default variable of the
context (``z`` for f and h, ``w`` for g); ``polyz``/``polyw`` pin it.
Division is only allowed by constant expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

Z = "z"
W = "w"


class StructuralError(ValueError):
    """Raised when an expression needs a variable the caller did not supply."""


class LogModulusError(ArithmeticError):
    pass


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, column: int, text: str = ""):
        self.column = column
        self.text = text
        super().__init__(f"{message} at column {column}")


def _c(x):
    """Coerce to complex128 (scalar or array)."""
    if isinstance(x, np.ndarray):
        return x.astype(np.complex128, copy=False)
    return np.complex128(x)


def is_overflow(value) -> bool | np.ndarray:
    """True where a value is not finite."""
    return ~np.isfinite(value)


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()

    # -- evaluation -------------------------------------------------------
    def __call__(self, z, w=None):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._eval(_c(z), None if w is None else _c(w))

    def evaluate(self, z, w=None):
        return self(z, w)

    def log_abs(self, z, w=None):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._logabs(_c(z), None if w is None else _c(w))

    def _logabs(self, z, w):
        v = self._eval(z, w)
        return np.log(np.abs(v))

    # -- structure --------------------------------------------------------
    @property
    def variables(self) -> frozenset:
        raise NotImplementedError

    def uses(self, var: str) -> bool:
        return var in self.variables

    def diff(self, var: str = Z) -> "Expr":
        raise NotImplementedError

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(Const(-1), _wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), mul(Const(-1), self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(Const(-1), self)

    def __pow__(self, n: int):
        return IntPow(self, int(n))


def _wrap(x) -> Expr:
    return x if isinstance(x, Expr) else Const(complex(x))


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    def _eval(self, z, w):
        if isinstance(z, np.ndarray):
            return np.full(z.shape, self.value, dtype=np.complex128)
        return np.complex128(self.value)

    def _logabs(self, z, w):
        v = abs(self.value)
        out = math.log(v) if v > 0 else -math.inf
        if isinstance(z, np.ndarray):
            return np.full(z.shape, out)
        return out

    @property
    def variables(self):
        return frozenset()

    def diff(self, var=Z):
        return Const(0)

    def __str__(self):
        return _fmt_complex(self.value)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str

    def __post_init__(self):
        if self.name not in (Z, W):
            raise ValueError(f"unknown variable {self.name!r}")

    def _eval(self, z, w):
        if self.name == Z:
            return z
        if w is None:
            raise StructuralError("expression uses w but only z was supplied")
        return w

    def _logabs(self, z, w):
        return np.log(np.abs(self._eval(z, w)))

    @property
    def variables(self):
        return frozenset({self.name})

    def diff(self, var=Z):
        return Const(1 if var == self.name else 0)

    def __str__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Add(Expr):
    terms: tuple

    def _eval(self, z, w):
        acc = self.terms[0]._eval(z, w)
        for t in self.terms[1:]:
            acc = acc + t._eval(z, w)
        return acc

    def _logabs(self, z, w):
        v = self._eval(z, w)
        if np.any(~np.isfinite(v)):
            raise LogModulusError("log-modulus not representable for sums at this magnitude")
        return np.log(np.abs(v))

    @property
    def variables(self):
        return frozenset().union(*(t.variables for t in self.terms))

    def diff(self, var=Z):
        return add(*(t.diff(var) for t in self.terms))

    def __str__(self):
        return "(" + " + ".join(str(t) for t in self.terms) + ")"


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    factors: tuple

    def _eval(self, z, w):
        acc = self.factors[0]._eval(z, w)
        for f in self.factors[1:]:
            acc = acc * f._eval(z, w)
        return acc

    def _logabs(self, z, w):
        acc = self.factors[0]._logabs(z, w)
        for f in self.factors[1:]:
            acc = acc + f._logabs(z, w)
        return acc

    @property
    def variables(self):
        return frozenset().union(*(f.variables for f in self.factors))

    def diff(self, var=Z):
        parts = []
        for i, f in enumerate(self.factors):
            d = f.diff(var)
            if _is_zero(d):
                continue
            others = self.factors[:i] + self.factors[i + 1:]
            parts.append(mul(d, *others))
        return add(*parts) if parts else Const(0)

    def __str__(self):
        return "*".join(str(f) for f in self.factors)


@dataclass(frozen=True, slots=True)
class IntPow(Expr):
    base: Expr
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("integer power must be >= 0")

    def _eval(self, z, w):
        b = self.base._eval(z, w)
        # repeated squaring keeps realness exact for real data
        result = None
        n = self.n
        while n:
            if n & 1:
                result = b if result is None else result * b
            n >>= 1
            if n:
                b = b * b
        if result is None:
            return np.ones_like(b) if isinstance(b, np.ndarray) else np.complex128(1)
        return result

    def _logabs(self, z, w):
        return self.n * self.base._logabs(z, w)

    @property
    def variables(self):
        return self.base.variables

    def diff(self, var=Z):
        if self.n == 0:
            return Const(0)
        d = self.base.diff(var)
        if _is_zero(d):
            return Const(0)
        inner = self.base if self.n == 2 else IntPow(self.base, self.n - 1)
        if self.n == 1:
            return d
        return mul(Const(self.n), inner, d)

    def __str__(self):
        return f"({self.base})^{self.n}"


@dataclass(frozen=True, slots=True)
class Exp(Expr):
    arg: Expr

    def _eval(self, z, w):
        return np.exp(self.arg._eval(z, w))

    def _logabs(self, z, w):
        # log|e^u| = Re u, no exponential is formed
        return np.real(self.arg._eval(z, w))

    @property
    def variables(self):
        return self.arg.variables

    def diff(self, var=Z):
        d = self.arg.diff(var)
        if _is_zero(d):
            return Const(0)
        return mul(self, d)

    def __str__(self):
        return f"exp({self.arg})"


@dataclass(frozen=True, slots=True)
class Poly(Expr):
    """c0 + c1*x + ... + cd*x^d evaluated by Horner's rule."""

    coeffs: tuple
    var: str = Z

    def __post_init__(self):
        cs = tuple(complex(c) for c in self.coeffs) or (0j,)
        object.__setattr__(self, "coeffs", cs)
        if self.var not in (Z, W):
            raise ValueError(f"unknown variable {self.var!r}")

    @property
    def degree(self) -> int:
        d = len(self.coeffs) - 1
        while d > 0 and self.coeffs[d] == 0:
            d -= 1
        return d

    def _x(self, z, w):
        if self.var == Z:
            return z
        if w is None:
            raise StructuralError("expression uses w but only z was supplied")
        return w

    def _eval(self, z, w):
        x = self._x(z, w)
        acc = np.complex128(self.coeffs[-1])
        for c in self.coeffs[-2::-1]:
            acc = acc * x + c
        if isinstance(x, np.ndarray) and not isinstance(acc, np.ndarray):
            acc = np.full(x.shape, acc, dtype=np.complex128)
        return acc

    def _logabs(self, z, w):
        v = self._eval(z, w)
        out = np.log(np.abs(v))
        bad = ~np.isfinite(v)
        if np.any(bad):
            # rescale by the leading term: log|cd| + d log|x| + log|sum c_k/c_d x^(k-d)|
            x = self._x(z, w)
            d = self.degree
            cd = self.coeffs[d]
            xb = x[bad] if isinstance(x, np.ndarray) else x
            y = 1.0 / xb
            acc = np.complex128(self.coeffs[0] / cd)
            for c in self.coeffs[1:d + 1]:
                acc = acc * y + c / cd
            tail = math.log(abs(cd)) + d * np.log(np.abs(xb)) + np.log(np.abs(acc))
            if isinstance(out, np.ndarray):
                out = out.copy()
                out[bad] = tail
            else:
                out = tail
        return out

    @property
    def variables(self):
        if self.degree == 0:
            return frozenset()
        return frozenset({self.var})

    def diff(self, var=Z):
        if var != self.var or self.degree == 0:
            return Const(0)
        return Poly(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0), self.var)

    def __str__(self):
        name = "polyz" if self.var == Z else "polyw"
        return f"{name}({','.join(_fmt_complex(c) for c in self.coeffs)})"


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def add(*terms: Expr) -> Expr:
    """Sum node with trivial zero terms dropped."""
    flat = []
    for t in terms:
        if isinstance(t, Add):
            flat.extend(t.terms)
        elif not _is_zero(t):
            flat.append(t)
    if not flat:
        return Const(0)
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors: Expr) -> Expr:
    """Product node; a literal zero factor collapses it, unit factors are dropped."""
    flat = []
    for f in factors:
        if isinstance(f, Mul):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if any(_is_zero(f) for f in flat):
        return Const(0)
    flat = [f for f in flat if not (isinstance(f, Const) and f.value == 1)]
    if not flat:
        return Const(1)
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def poly(coeffs: Sequence[complex], var: str = Z) -> Poly:
    return Poly(tuple(coeffs), var)


def evaluate(expr: Expr, z, w=None):
    """Value of ``expr`` at (z, w); non-finite output flags overflow."""
    return expr(z, w)


def log_modulus(expr: Expr, z, w=None):
    """log|expr(z, w)| without forming exponentials."""
    return expr.log_abs(z, w)


def derivative(expr: Expr, var: str = Z) -> Expr:
    return expr.diff(var)


def _fmt_complex(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}i"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


# ---------------------------------------------------------------------------
# parser


_NUM_CHARS = set("0123456789.")


class _Parser:
    def __init__(self, text: str, default_var: str):
        self.text = text
        self.pos = 0
        self.default_var = default_var

    def error(self, msg, pos=None):
        p = self.pos if pos is None else pos
        raise ExprSyntaxError(msg, p + 1, self.text)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return e

    def expr(self):
        terms = [self.term()]
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            t = self.term()
            terms.append(t if op == "+" else mul(Const(-1), t))
        return add(*terms)

    def term(self):
        e = self.unary()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            start = self.pos
            self.pos += 1
            rhs = self.unary()
            if op == "*":
                e = mul(e, rhs)
            else:
                if rhs.variables:
                    self.error("division only by constants", start)
                d = complex(rhs(0.0, 0.0))
                if d == 0:
                    self.error("division by zero", start)
                e = mul(e, Const(1 / d))
        return e

    def unary(self):
        if self.peek() == "-":
            self.pos += 1
            return mul(Const(-1), self.unary())
        if self.peek() == "+":
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            self.skip()
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if start == self.pos:
                self.error("expected non-negative integer exponent")
            return IntPow(base, int(self.text[start:self.pos]))
        return base

    def ident(self):
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        return self.text[start:self.pos], start

    def atom(self):
        ch = self.peek()
        if not ch:
            self.error("unexpected end of input")
        if ch in _NUM_CHARS:
            return self.number()
        if ch == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if ch.isalpha():
            name, start = self.ident()
            if name == "z":
                return Var(Z)
            if name == "w":
                return Var(W)
            if name == "i":
                return Const(1j)
            if name == "pi":
                return Const(math.pi)
            if name == "exp":
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return Exp(e)
            if name in ("poly", "polyz", "polyw"):
                var = {"poly": self.default_var, "polyz": Z, "polyw": W}[name]
                self.expect("(")
                coeffs = [self.const()]
                while self.peek() == ",":
                    self.pos += 1
                    coeffs.append(self.const())
                self.expect(")")
                return Poly(tuple(coeffs), var)
            self.error(f"unknown name {name!r}", start)
        self.error(f"unexpected {ch!r}")

    def const(self) -> complex:
        start = self.pos
        e = self.expr()
        if e.variables:
            self.error("polynomial coefficients must be constants", start)
        return complex(e(0.0, 0.0))

    def number(self):
        self.skip()
        start = self.pos
        t = self.text
        while self.pos < len(t) and t[self.pos] in _NUM_CHARS:
            self.pos += 1
        if self.pos < len(t) and t[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(t) and t[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(t) and t[self.pos].isdigit():
                while self.pos < len(t) and t[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = save
        lit = t[start:self.pos]
        try:
            val = float(lit)
        except ValueError:
            self.error(f"bad number {lit!r}", start)
        if self.pos < len(t) and t[self.pos] == "i" and not (
            self.pos + 1 < len(t) and t[self.pos + 1].isalpha()
        ):
            self.pos += 1
            return Const(complex(0, val))
        return Const(val)


def parse_expr(text: str, default_var: str = Z) -> Expr:
    """Parse the textual grammar described in the module docstring."""
    return _Parser(text, default_var).parse()
