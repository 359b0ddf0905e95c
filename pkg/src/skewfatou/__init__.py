"""Numerical companion for skew-product maps F(z, w) = (f(z) + w*h, g(w)) near an invariant fiber."""

from .expr import Const, Exp, Expr, Poly, Var, parse_expr
from .dynamics import SkewProduct, classify_orbit, fiber_orbit, iterate, select_escaping_subsequence

__version__ = "0.1.0"

__all__ = ["Const", "Exp", "Expr", "Poly", "Var", "parse_expr", "SkewProduct", "classify_orbit",
           "fiber_orbit", "iterate", "select_escaping_subsequence"]
