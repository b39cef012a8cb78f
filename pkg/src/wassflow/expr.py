"""Arithmetic mini-grammar for potentials and test functions.

Accepted: numeric literals, the variables ``x`` and ``t``, the operators
``+ - * / **``, parentheses, and the functions ``exp``, ``log``, ``sqrt``,
``abs``, ``sin``, ``cos``.  Expressions are checked against this whitelist
before sympy ever sees them.
"""
from __future__ import annotations

import ast

import numpy as np
import sympy as sp

FUNCTIONS = {"exp": sp.exp, "log": sp.log, "sqrt": sp.sqrt, "abs": sp.Abs,
             "sin": sp.sin, "cos": sp.cos}
VARIABLES = ("x", "t")
_x, _t = sp.symbols("x t", real=True)

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name,
            ast.Load, ast.Call, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
            ast.USub, ast.UAdd)


# derivatives of abs() produce point masses; on a grid they evaluate to 0
_GRID_FUNCS = {"DiracDelta": lambda *a: np.zeros_like(np.asarray(a[0], dtype=float))}


class ExpressionError(ValueError):
    pass


def _check(src: str) -> None:
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ExpressionError(f"{type(node).__name__} not allowed in {src!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals allowed in {src!r}")
        if isinstance(node, ast.Name) and node.id not in VARIABLES and node.id not in FUNCTIONS:
            raise ExpressionError(f"unknown name {node.id!r} in {src!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {src!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take one argument in {src!r}")


class Expr:
    """A validated expression in ``x`` (and optionally ``t``).

    Calling it evaluates on numpy arrays; :meth:`diff` returns the
    symbolic derivative as another :class:`Expr`.
    """

    def __init__(self, src, _sym=None):
        if _sym is None:
            src = str(src)
            _check(src)
            _sym = sp.sympify(src, locals={**FUNCTIONS, "x": _x, "t": _t})
        self.src = src
        self.sym = _sym
        self._f = sp.lambdify((_t, _x), _sym, modules=[_GRID_FUNCS, "numpy"])

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._f(t, x), dtype=float), x.shape).copy()

    def diff(self, var="x", order=1) -> "Expr":
        s = sp.diff(self.sym, _x if var == "x" else _t, order)
        return Expr(str(s), _sym=s)

    def __repr__(self):
        return f"Expr({self.src!r})"


def as_values(spec, x) -> np.ndarray:
    """Evaluate an expression string, number, or sample list on nodes ``x``."""
    x = np.asarray(x, dtype=float)
    if isinstance(spec, Expr):
        return spec(x)
    if isinstance(spec, (int, float)):
        return np.full_like(x, float(spec))
    if isinstance(spec, str):
        return Expr(spec)(x)
    arr = np.asarray(spec, dtype=float)
    if arr.shape != x.shape:
        raise ValueError(f"sample list has {arr.size} values, grid has {x.size}")
    return arr
