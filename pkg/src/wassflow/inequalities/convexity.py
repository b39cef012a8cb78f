"""Displacement-convexity profiles of H_m along W2 geodesics."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from ..domain import ReferencePotential
from ..measures import GridMeasure, QuantileRep, to_quantile
from ..mcalc import MParam
from ..flow.jko import QuantileEnergy, w2sq_edges, _edges_of


@dataclass(frozen=True)
class ConvexityProfile:
    t: np.ndarray
    H: np.ndarray
    K_target: float
    W2sq: float
    margin: np.ndarray
    tol: float

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin)) if self.margin.size else math.inf

    @property
    def verdict(self) -> str:
        return "pass" if self.min_margin >= -self.tol else "fail"

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "H": self.H.tolist(), "K_target": self.K_target,
                "W2sq": self.W2sq, "margin": self.margin.tolist(), "tol": self.tol,
                "min_margin": self.min_margin, "verdict": self.verdict}


def _as_q(mu, J):
    return mu if isinstance(mu, QuantileRep) else to_quantile(mu, J)


def convexity_profile(mu0, mu1, ref: ReferencePotential, p: MParam, K: float,
                      T_grid: int = 21, J: int = 256, rel_tol: float = 1e-4) -> ConvexityProfile:
    """H_m along the quantile interpolation between ``mu0`` and ``mu1``.

    ``margin(t) = (1-t)H(0) + tH(1) - (K/2) t(1-t) W2^2 - H(t)`` with the
    energy and W2 evaluated in the same quantile coordinates, where both
    are exact for piecewise-uniform cells.
    """
    d = ref.domain
    q0, q1 = _as_q(mu0, J), _as_q(mu1, J)
    if q0.J != q1.J:
        raise ValueError("endpoints need the same J")
    Y0, Y1 = _edges_of(q0, d.a, d.b), _edges_of(q1, d.a, d.b)
    E = QuantileEnergy(ref, p, q0.J)
    t = np.linspace(0.0, 1.0, int(T_grid))
    H = np.array([E((1 - s) * Y0 + s * Y1) for s in t])
    W2sq = w2sq_edges(Y1, Y0)
    if not (math.isfinite(H[0]) and math.isfinite(H[-1])):
        return ConvexityProfile(t, H, K, W2sq, np.zeros_like(t), math.inf)
    margin = (1 - t) * H[0] + t * H[-1] - 0.5 * K * t * (1 - t) * W2sq - H
    tol = rel_tol * (1.0 + float(np.max(np.abs(H))))
    return ConvexityProfile(t, H, float(K), W2sq, margin, tol)
