"""Small arithmetic DSL for scalar fields of two variables.

Grammar: operators ``+ - * / ^``, functions ``sqrt exp sin cos atan``,
variables ``x`` and ``y``, numeric literals.  Expressions are parsed with
sympy (``^`` means power), validated against that whitelist, and compiled
to vectorized numpy callables together with exact partial derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .errors import DslError

X, Y = sp.symbols("x y", real=True)

_ALLOWED_FUNCS = {sp.sqrt, sp.exp, sp.sin, sp.cos, sp.atan}
_LOCALS = {
    "x": X,
    "y": Y,
    "sqrt": sp.sqrt,
    "exp": sp.exp,
    "sin": sp.sin,
    "cos": sp.cos,
    "atan": sp.atan,
}
_TRANSFORMS = standard_transformations + (convert_xor,)


def parse_scalar(text: str) -> sp.Expr:
    """Parse one scalar expression; raise DslError on anything off-grammar."""
    if not isinstance(text, str) or not text.strip():
        raise DslError("empty field expression")
    try:
        expr = parse_expr(text, local_dict=_LOCALS, transformations=_TRANSFORMS)
    except Exception as exc:  # sympy raises a zoo of error types
        raise DslError(f"cannot parse {text!r}: {exc}") from exc
    if not isinstance(expr, sp.Expr):
        raise DslError(f"{text!r} is not a scalar expression")
    extra = expr.free_symbols - {X, Y}
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise DslError(f"unknown variable(s) {names} in {text!r}; only x, y allowed")
    # sqrt parses to Pow(..., 1/2) so only sin/cos/exp/atan survive as Functions.
    for fn in expr.atoms(sp.Function):
        if fn.func not in (sp.sin, sp.cos, sp.exp, sp.atan):
            raise DslError(f"function {fn.func} not allowed in {text!r}")
    return expr


def _lambdify(expr: sp.Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    raw = sp.lambdify((X, Y), expr, modules="numpy")

    def call(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        out = np.asarray(raw(x, y), dtype=float)
        if out.shape != shape:  # constant subexpressions collapse to scalars
            out = np.broadcast_to(out, shape).copy()
        return out

    return call


@dataclass(frozen=True)
class CompiledPair:
    """Two scalar components with exact first partial derivatives."""

    f_expr: sp.Expr
    g_expr: sp.Expr
    f: Callable
    g: Callable
    fx: Callable
    fy: Callable
    gx: Callable
    gy: Callable

    @classmethod
    def from_strings(cls, f_text: str, g_text: str) -> "CompiledPair":
        fe = parse_scalar(f_text)
        ge = parse_scalar(g_text)
        return cls.from_exprs(fe, ge)

    @classmethod
    def from_exprs(cls, fe: sp.Expr, ge: sp.Expr) -> "CompiledPair":
        return cls(
            f_expr=fe,
            g_expr=ge,
            f=_lambdify(fe),
            g=_lambdify(ge),
            fx=_lambdify(sp.diff(fe, X)),
            fy=_lambdify(sp.diff(fe, Y)),
            gx=_lambdify(sp.diff(ge, X)),
            gy=_lambdify(sp.diff(ge, Y)),
        )
