"""Talagrand, HWI, log-Sobolev and Poincare checks against a reference nu.

Each checker returns a verdict record (see :mod:`.verdict`).  Tolerances
are ``c * (h + 1/J)`` scaled by the size of the compared quantities and
are echoed in the record.
"""
from __future__ import annotations

import math

import numpy as np

from ..domain import ReferencePotential
from ..entropy import fisher_i_m, h_m
from ..expr import as_values
from ..measures import GridMeasure, to_quantile
from ..mcalc import MParam
from ..transport import w2_edges
from ..flow.trace import reference_measure
from .verdict import FAIL, PASS, curvature_ok, hypotheses, not_applicable, record

TOL_C = 1.0


def _precheck(name, ref, p):
    hyp = hypotheses(ref)
    if not ref.K_hat > 0:
        return hyp, not_applicable(name, hyp, "K <= 0")
    if abs(ref.mass - 1.0) > 1e-9:
        return hyp, not_applicable(name, hyp, "nu is not normalised")
    if not curvature_ok(ref):
        return hyp, not_applicable(name, hyp, "Ric_N >= 0 fails on the grid")
    if p.m in (0.5, 1.0) or p.m < (p.n - 1) / p.n:
        return hyp, not_applicable(name, hyp, "m outside the admissible range")
    return hyp, None


def _resolution(ref, J):
    return ref.domain.h + 1.0 / J


def w2_to_nu(mu: GridMeasure, ref: ReferencePotential, J: int) -> float:
    return w2_edges(to_quantile(mu, J), to_quantile(reference_measure(ref), J))


def talagrand_check(mu: GridMeasure, ref: ReferencePotential, p: MParam,
                    J: int | None = None, tol: float | None = None,
                    tol_scale: float = 1.0) -> dict:
    """``W2(mu, nu) <= sqrt(2 H_m(mu|nu) / K)``."""
    name = "talagrand"
    hyp, na = _precheck(name, ref, p)
    if na:
        return na
    J = J or 4 * ref.domain.M
    K = ref.K_hat
    H = h_m(p, mu, ref).value
    W = w2_to_nu(mu, ref, J)
    rhs = math.sqrt(2.0 * max(H, 0.0) / K) if math.isfinite(H) else math.inf
    if tol is None:
        tol = tol_scale * TOL_C * _resolution(ref, J)
    return record(name, W, rhs, tol, hyp, H=H, ratio=W / rhs if rhs > 0 else (0.0 if W == 0 else math.inf))


def hwi_lsi_check(mu: GridMeasure, ref: ReferencePotential, p: MParam,
                  J: int | None = None, tol: float | None = None,
                  tol_scale: float = 1.0) -> dict:
    """``H <= sqrt(I) W2 - (K/2) W2^2`` and ``H <= I / (2K)``.

    Returns a record with the HWI verdict and the LSI verdict nested under
    ``"lsi"``; the top-level verdict fails if either fails.
    """
    name = "hwi_lsi"
    hyp, na = _precheck(name, ref, p)
    if na:
        return na
    J = J or 4 * ref.domain.M
    K = ref.K_hat
    H = h_m(p, mu, ref).value
    I, diag = fisher_i_m(p, mu, ref, diagnostics=True)
    if not math.isfinite(I):
        rec = record(name, H, math.inf, 0.0, hyp, verdict=PASS, I=I, diagnostic=diag)
        rec["lsi"] = record("lsi", H, math.inf, 0.0, hyp, verdict=PASS)
        rec["note"] = "I_m infinite: inequalities vacuous"
        return rec
    W = w2_to_nu(mu, ref, J)
    if tol is None:
        tol = tol_scale * TOL_C * _resolution(ref, J) * (1.0 + H + I)
    hwi = math.sqrt(I) * W - 0.5 * K * W * W
    lsi = record("lsi", H, I / (2 * K), tol, hyp)
    rec = record(name, H, hwi, tol, hyp, I=I, W2=W, rho_floor=diag["rho_floor"])
    rec["lsi"] = lsi
    if lsi["verdict"] == FAIL:
        rec["verdict"] = FAIL
    return rec


def poincare_check(f, ref: ReferencePotential, p: MParam, tol: float | None = None,
                   tol_scale: float = 1.0) -> dict:
    """``int f^2 sigma^(m-1) dnu <= (1/K) int |d(f sigma^(m-1))|^2 dnu``.

    ``f`` (expression, number or nodal samples) is centred under nu first.
    """
    name = "poincare"
    hyp, na = _precheck(name, ref, p)
    if na:
        return na
    d = ref.domain
    m, K = p.m, ref.K_hat
    nu = ref.sigma * d.cell_volume
    supp = ref.sigma > 0
    fv = as_values(f, d.x)
    fv = fv - float(np.sum(fv * nu)) / float(np.sum(nu))
    sp = np.where(supp, ref.sigma ** (m - 1.0) if m < 1 else np.where(supp, ref.sigma, 1.0) ** (m - 1.0), 0.0)
    lhs = float(np.sum(fv * fv * sp * nu))
    g = fv * sp
    dg, _ = d.derivative(g, 1)
    rhs = float(np.sum(dg * dg * nu)) / K
    if tol is None:
        tol = tol_scale * TOL_C * d.h * (1.0 + lhs + rhs)
    return record(name, lhs, rhs, tol, hyp)
