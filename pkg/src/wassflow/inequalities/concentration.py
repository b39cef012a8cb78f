"""Concentration function estimates and the m-entropy concentration bounds."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from ..domain import ReferencePotential
from ..mcalc import MParam, exp_m, ln_m
from .verdict import FAIL, NA, PASS, curvature_ok, hypotheses, not_applicable


def g_c_moment(ref: ReferencePotential, p: MParam, c: float) -> float:
    """``G_c = sum sigma^c omega`` for c in (1/2, 1] (m < 1 setting)."""
    if not 0.5 < c <= 1.0:
        raise ValueError(f"c={c} outside (1/2, 1]")
    if p.m >= 1:
        raise ValueError("G_c for c <= 1 is defined here for m < 1")
    return _g(ref, c)


def _g(ref, c):
    val = float(np.sum(ref.sigma**c * ref.domain.cell_volume))
    if not math.isfinite(val):
        raise ValueError("sigma^c is not integrable on the grid")
    return val


@dataclass(frozen=True)
class ConcentrationReport:
    r: np.ndarray
    alpha_lower: np.ndarray
    bound: np.ndarray | None = None
    slack: np.ndarray | None = None
    family: str = ""

    def with_bound(self, bound, slack) -> "ConcentrationReport":
        return ConcentrationReport(self.r, self.alpha_lower, np.asarray(bound),
                                   np.asarray(slack), self.family)

    def to_dict(self) -> dict:
        out = {"r": self.r.tolist(), "alpha_lower": self.alpha_lower.tolist(),
               "family": self.family}
        if self.bound is not None:
            out["bound"] = self.bound.tolist()
            out["slack"] = self.slack.tolist()
        return out


class _Cdf:
    """Exact CDF of the piecewise-constant reference density."""

    def __init__(self, ref):
        d = ref.domain
        mass = ref.sigma * d.cell_volume
        self.total = float(mass.sum())
        self.e = d.edges
        self.F = np.concatenate([[0.0], np.cumsum(mass)]) / self.total

    def __call__(self, x):
        return np.interp(x, self.e, self.F, left=0.0, right=1.0)

    def mass(self, lo, hi):
        return np.maximum(self(hi) - self(lo), 0.0)

    def inv(self, s):
        return np.interp(s, self.F, self.e)


def _union_complement(cdf, blocks, r, a, b):
    """``1 - nu(B(A, r))`` for A a union of closed intervals (sorted)."""
    lo = np.maximum(blocks[:, 0] - r, a)
    hi = np.minimum(blocks[:, 1] + r, b)
    covered = 0.0
    cur_lo, cur_hi = lo[0], hi[0]
    for l, h in zip(lo[1:], hi[1:]):
        if l <= cur_hi:
            cur_hi = max(cur_hi, h)
        else:
            covered += float(cdf.mass(cur_lo, cur_hi))
            cur_lo, cur_hi = l, h
    covered += float(cdf.mass(cur_lo, cur_hi))
    return 1.0 - covered


def alpha_estimate(ref: ReferencePotential, p: MParam, r_grid, n_blocks: int = 32,
                   max_union: int = 8, n_centres: int = 200) -> ConcentrationReport:
    """Lower estimate of ``alpha(r) = sup {1 - nu(B(A,r)) : nu(A) >= 1/2}``.

    The sup runs over a fixed family: the two half-lines cut at the median,
    complements of single intervals, and greedy unions of at most
    ``max_union`` coarse blocks.  A fixed family keeps the estimate
    nonincreasing in r.
    """
    d = ref.domain
    if d.periodic:
        raise ValueError("concentration estimates are implemented for segments")
    r = np.asarray(r_grid, dtype=float)
    cdf = _Cdf(ref)
    a, b = d.a, d.b
    med = float(cdf.inv(0.5))
    best = np.zeros_like(r)
    # half-lines (-inf, med] and [med, inf)
    best = np.maximum(best, 1.0 - cdf(med + r))
    best = np.maximum(best, cdf(med - r))
    # complements of an interval (c - s, c + s) holding at most half the mass
    for c in np.linspace(a, b, n_centres):
        # largest symmetric s with nu((c-s, c+s)) <= 1/2, by bisection
        s_lo, s_hi = 0.0, b - a
        for _ in range(50):
            s = 0.5 * (s_lo + s_hi)
            if float(cdf.mass(c - s, c + s)) <= 0.5:
                s_lo = s
            else:
                s_hi = s
        s = s_lo
        if s <= 0:
            continue
        inner = np.where(r < s, cdf.mass(c - s + r, c + s - r), 0.0)
        best = np.maximum(best, inner)
    # greedy unions of heavy coarse blocks
    edges = np.linspace(a, b, n_blocks + 1)
    bmass = cdf.mass(edges[:-1], edges[1:])
    for start in range(n_blocks):
        chosen = [start]
        total = bmass[start]
        while total < 0.5 and len(chosen) < max_union:
            lo, hi = min(chosen), max(chosen)
            cands = [k for k in (lo - 1, hi + 1) if 0 <= k < n_blocks]
            if not cands:
                break
            k = max(cands, key=lambda j: bmass[j])
            chosen.append(k)
            total += bmass[k]
        if total < 0.5:
            continue
        blocks = np.array([[edges[k], edges[k + 1]] for k in sorted(chosen)])
        vals = np.array([_union_complement(cdf, blocks, ri, a, b) for ri in r])
        best = np.maximum(best, vals)
    best[r >= b - a] = 0.0
    best = np.clip(best, 0.0, 0.5)
    return ConcentrationReport(r, best, family=f"half-lines, interval complements, "
                               f"unions of <= {max_union} of {n_blocks} blocks")


def conc_implicit_rhs(ref, p: MParam, r, theta: float):
    """Right-hand side of the implicit bound in alpha."""
    m, K = p.m, ref.K_hat
    Gm = _g(ref, m)
    Gc = _g(ref, (m - theta) / (1.0 - theta))
    r = np.asarray(r, dtype=float)
    return -Gc ** (theta - 1.0) * ((math.sqrt(m * K / 2.0) * r - math.sqrt(Gm)) ** 2 - Gm)


def conc_implicit_lhs(p: MParam, alpha, theta: float):
    """``alpha^(theta - m) ln_m(2 alpha)`` (increasing in alpha on (0, 1/2])."""
    m = p.m
    alpha = np.asarray(alpha, dtype=float)
    return alpha ** (theta - m) * ln_m(m, 2.0 * alpha)


def m_normal_bound(ref, p: MParam, r):
    """Explicit m-normal upper bound on alpha for m in (1/2, 1)."""
    m, K = p.m, ref.K_hat
    vol = ref.domain.total_volume
    r = np.asarray(r, dtype=float)
    return (2 * m - 1) ** (1.0 / (m - 1)) / 2.0 * exp_m(m, -m * K * r * r / (4 * vol ** (1 - m)))


def bounded_support_bound(ref, p: MParam, r):
    """Upper bound on alpha for m in (1, 2) from the sup of sigma."""
    m, K = p.m, ref.K_hat
    smax = float(np.max(ref.sigma))
    r = np.asarray(r, dtype=float)
    return 1.0 / ((2.0 / m - 1) ** (1.0 / (m - 1)) * exp_m(m, m * K * smax ** (1 - m) * r * r / 4))


def classical_bound(K: float, r):
    r = np.asarray(r, dtype=float)
    return 0.5 * np.exp(-K * r * r / 4 + 2)


def conc_bound_check(ref: ReferencePotential, p: MParam, report: ConcentrationReport,
                     theta: float = 0.0, rel_tol: float = 1e-9) -> dict:
    """Check the estimated alpha against every bound applicable to (m, theta).

    For m in (1/2, 1): the implicit bound and the m-normal bound.
    For m in (1, 2]: the implicit bound, plus the bounded-support bound if m < 2.
    """
    m, K = p.m, ref.K_hat
    hyp = hypotheses(ref, theta=theta)
    name = "concentration"
    if not K > 0:
        return not_applicable(name, hyp, "K <= 0")
    if not curvature_ok(ref):
        return not_applicable(name, hyp, "Ric_N >= 0 fails on the grid")
    if abs(ref.mass - 1.0) > 1e-9:
        return not_applicable(name, hyp, "nu is not normalised")
    if 0.5 < m < 1:
        if not 0 <= theta < 2 * m - 1:
            return not_applicable(name, hyp, "theta outside [0, 2m-1)")
    elif 1 < m <= 2:
        if not 0 <= theta < 1:
            return not_applicable(name, hyp, "theta outside [0, 1)")
    else:
        return not_applicable(name, hyp, "m outside (1/2, 1) and (1, 2]")
    r, al = report.r, report.alpha_lower
    checks = {}
    pos = al > 0
    lhs = np.full_like(r, -np.inf)
    lhs[pos] = conc_implicit_lhs(p, al[pos], theta)
    rhs = conc_implicit_rhs(ref, p, r, theta)
    tol = rel_tol * (1 + np.abs(rhs))
    checks["implicit"] = {"lhs": lhs.tolist(), "rhs": rhs.tolist(),
                          "slack": (rhs + tol - lhs).tolist(),
                          "verdict": PASS if np.all(lhs <= rhs + tol) else FAIL}
    explicit = None
    if m < 1:
        explicit = ("m_normal", m_normal_bound(ref, p, r))
    elif m < 2:
        explicit = ("bounded_support", bounded_support_bound(ref, p, r))
    if explicit:
        key, bnd = explicit
        checks[key] = {"bound": bnd.tolist(), "slack": (bnd - al).tolist(),
                       "verdict": PASS if np.all(al <= bnd * (1 + rel_tol)) else FAIL}
        report = report.with_bound(bnd, bnd - al)
    verdict = PASS if all(c["verdict"] == PASS for c in checks.values()) else FAIL
    return {"name": name, "hypotheses": hyp, "lhs": None, "rhs": None,
            "slack": float(min(np.min(c["slack"]) for c in checks.values())),
            "verdict": verdict, "tolerances": {"rel": rel_tol}, "checks": checks,
            "report": report.to_dict()}
