"""Deformed logarithm / exponential calculus indexed by the exponent m.

All functions accept either an :class:`MParam` or a bare float ``m`` and
operate elementwise on numpy arrays.  Evaluation goes through ``expm1`` /
``log1p`` so that values stay accurate as m approaches 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np


@dataclass(frozen=True)
class MParam:
    """Exponent m together with the ambient dimension n.

    ``N = 1/(1-m)`` is the effective dimension of the weighted Ricci
    curvature.  ``n = 1`` is accepted as the desk-scale model.
    """

    m: float
    n: int = 1
    N: float = field(init=False)

    def __post_init__(self):
        m, n = float(self.m), int(self.n)
        if n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n}")
        if not math.isfinite(m) or m == 1.0:
            raise ValueError(f"m must be finite and != 1, got {m}")
        lo = (n - 1) / n
        if m < lo or m <= 0.0:
            raise ValueError(f"m={m} outside [(n-1)/n, 1) u (1, inf) for n={n}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "N", 1.0 / (1.0 - m))

    @property
    def supports_jko_equivalence(self) -> bool:
        return self.m <= 2.0

    @property
    def supports_concentration_lt1(self) -> bool:
        return 0.5 < self.m < 1.0

    @property
    def model_note(self) -> str:
        if self.n == 1:
            return "n=1 desk-scale model (theorems are stated for n>=2)"
        return f"n={self.n}"


def _m(p) -> float:
    return p.m if isinstance(p, MParam) else float(p)


def _out(x, scalar):
    return float(x) if scalar else x


def ln_m(p, t):
    """m-logarithm ``(t^(m-1) - 1)/(m-1)``.

    Requires ``t > 0`` for m < 1 and ``t >= 0`` for m > 1.
    """
    m = _m(p)
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if m < 1 and np.any(~(t > 0)):
        raise ValueError("ln_m needs t > 0 when m < 1")
    if m > 1 and np.any(~(t >= 0)):
        raise ValueError("ln_m needs t >= 0 when m > 1")
    with np.errstate(divide="ignore"):
        a = (m - 1.0) * np.log(t)
    return _out(np.expm1(a) / (m - 1.0), scalar)


def exp_m(p, t):
    """m-exponential ``{1 + (m-1) t}^(1/(m-1))``.

    For m > 1 the value is clamped to 0 below ``-1/(m-1)``.  For m < 1 the
    argument must stay below ``1/(1-m)``.
    """
    m = _m(p)
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)):
        raise ValueError("exp_m got NaN")
    base = (m - 1.0) * t
    if m < 1:
        if np.any(t >= 1.0 / (1.0 - m)):
            raise ValueError(f"exp_m undefined for t >= 1/(1-m) = {1.0 / (1.0 - m)} when m < 1")
        with np.errstate(over="ignore"):
            return _out(np.exp(np.log1p(base) / (m - 1.0)), scalar)
    out = np.zeros_like(t)
    ok = base > -1.0
    with np.errstate(over="ignore"):
        out[ok] = np.exp(np.log1p(base[ok]) / (m - 1.0))
    return _out(out, scalar)


def e_m(p, t):
    """``t ln_m(t) = (t^m - t)/(m-1)`` with ``e_m(0) = 0``."""
    m = _m(p)
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if np.any(~(t >= 0)):
        raise ValueError("e_m needs t >= 0")
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] * (np.expm1((m - 1.0) * np.log(t[pos])) / (m - 1.0))
    return _out(out, scalar)


def limit_check_m_to_1(t: float, eps: float) -> dict:
    """Deviation of the m-calculus from ln / exp / t ln t at m = 1 +- eps.

    Each deviation is compared with twice its leading Taylor term
    ``eps * c`` plus a rounding floor; ``holds`` reports whether all are
    within that O(eps) envelope.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 < eps < 0.1:
        raise ValueError("eps must lie in (0, 0.1)")
    s = math.log(t)
    dev = {"ln": 0.0, "exp": 0.0, "e": 0.0}
    for m in (1.0 - eps, 1.0 + eps):
        dev["ln"] = max(dev["ln"], abs(ln_m(m, t) - s))
        dev["exp"] = max(dev["exp"], abs(exp_m(m, s) - t))
        dev["e"] = max(dev["e"], abs(e_m(m, t) - t * s))
    # leading terms: (m-1) s^2/2, (m-1) s^2 e^s/2, (m-1) t s^2/2
    coef = {"ln": s * s / 2, "exp": s * s * t / 2, "e": t * s * s / 2}
    floor = 1e-12 * max(1.0, t)
    bound = {k: 2.0 * eps * coef[k] * (1.0 + 10 * eps) + floor for k in coef}
    return {
        "t": t,
        "eps": eps,
        "deviation": dev,
        "bound": bound,
        "holds": all(dev[k] <= bound[k] for k in dev),
    }


def conc_lemma_bounds(p, a: float, r: float):
    """Both sides of the elementary m-exponential inequality used for
    m-normal concentration.

    For m in (1/2, 1):
        lhs = exp_m(-(ar-1)^2 + 1),  rhs = (2m-1)^(1/(m-1)) exp_m(-a^2 r^2/2),
        and the claim is ``lhs <= rhs``.
    For m in (1, 2):
        lhs = exp_m((ar-1)^2 - 1),   rhs = (2/m-1)^(1/(m-1)) exp_m(a^2 r^2/2),
        and the claim is ``lhs >= rhs``.

    Returns ``(lhs, rhs, holds)``.
    """
    m = _m(p)
    if not (a > 0 and r > 0):
        raise ValueError("a and r must be positive")
    ar = a * r
    if 0.5 < m < 1:
        lhs = exp_m(m, -(ar - 1.0) ** 2 + 1.0)
        rhs = (2 * m - 1) ** (1.0 / (m - 1)) * exp_m(m, -0.5 * ar * ar)
        return lhs, rhs, lhs <= rhs * (1 + 1e-12)
    if 1 < m < 2:
        lhs = exp_m(m, (ar - 1.0) ** 2 - 1.0)
        rhs = (2.0 / m - 1) ** (1.0 / (m - 1)) * exp_m(m, 0.5 * ar * ar)
        return lhs, rhs, lhs >= rhs * (1 - 1e-12)
    raise ValueError(f"m={m} outside (1/2, 1) u (1, 2)")
