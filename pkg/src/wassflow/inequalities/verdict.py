"""Uniform JSON-ready verdict records for the inequality checkers."""
from __future__ import annotations

import math

import numpy as np

from ..domain import ReferencePotential, ric_N

PASS, FAIL, NA = "pass", "fail", "non-applicable"


def _num(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def record(name, lhs, rhs, tol, hypotheses, verdict=None, **extra) -> dict:
    """``lhs <= rhs + tol`` record; ``slack = rhs + tol - lhs``."""
    if verdict is None:
        verdict = PASS if lhs <= rhs + tol else FAIL
    slack = rhs + tol - lhs if verdict != NA else math.nan
    out = {"name": name, "hypotheses": hypotheses, "lhs": _num(lhs), "rhs": _num(rhs),
           "slack": _num(slack), "verdict": verdict, "tolerances": {"abs": _num(tol)}}
    for k, v in extra.items():
        out[k] = _num(v) if not isinstance(v, (dict, list)) else v
    return out


def not_applicable(name, hypotheses, reason) -> dict:
    return {"name": name, "hypotheses": hypotheses, "lhs": None, "rhs": None, "slack": None,
            "verdict": NA, "tolerances": {}, "reason": reason}


def curvature_ok(ref: ReferencePotential) -> bool:
    """Ric_N >= 0 on the grid (automatic when psi vanishes)."""
    d = ref.domain
    if np.all(d.psi == 0):
        return True
    ric, flag = ric_N(d, ref.p)
    return bool(np.all(ric[~flag] >= -1e-9))


def hypotheses(ref: ReferencePotential, **more) -> dict:
    p = ref.p
    h = {"m": p.m, "n": p.n, "N": p.N, "K": _num(ref.K_hat), "nu_mass": ref.mass,
         "ric_N_nonnegative": curvature_ok(ref), "note": p.model_note}
    h.update({k: _num(v) for k, v in more.items()})
    return h
