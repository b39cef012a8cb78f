"""Pointwise evaluation of psi and Psi with first and second derivatives."""
from __future__ import annotations

import numpy as np

from ..domain import Domain1D, ReferencePotential
from ..expr import Expr


def _triple(src, spline_from):
    if isinstance(src, (int, float)):
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        const = lambda x: np.full_like(np.asarray(x, dtype=float), float(src))
        return const, zero, zero
    if isinstance(src, (str, Expr)):
        e = src if isinstance(src, Expr) else Expr(src)
        return e, e.diff(), e.diff(order=2)
    s = spline_from()
    return s, s.derivative(1), s.derivative(2)


def psi_fns(d: Domain1D):
    """``(psi, psi', psi'')`` as callables."""
    return _triple(d.psi_src if d.psi_src is not None else 0.0, lambda: d.spline(d.psi))


def potential_fns(ref: ReferencePotential):
    """``(P, P', P'')`` for the chemical potential ``-sigma^(m-1)/(m-1)``.

    ``P = Psi - 1/(m-1)``, clamped to 0 where ``Psi >= 1/(m-1)`` when m > 1.
    """
    m = ref.p.m
    f, f1, f2 = _triple(ref.Psi_src if ref.Psi_src is not None else None,
                        lambda: ref.domain.spline(ref.Psi))
    c = 1.0 / (m - 1.0)
    if m < 1:
        return (lambda x: f(x) - c), f1, f2

    def P(x):
        return np.minimum(f(x), c) - c

    def P1(x):
        return np.where(f(x) < c, f1(x), 0.0)

    def P2(x):
        return np.where(f(x) < c, f2(x), 0.0)

    return P, P1, P2


def is_zero_weight(d: Domain1D) -> bool:
    return bool(np.all(d.psi == 0))
