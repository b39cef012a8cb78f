"""Minimizing-movement (JKO) steps for H_m in quantile coordinates.

A measure is stored as edges ``Y_0 < ... < Y_J`` with mass ``1/J`` spread
uniformly (in Lebesgue measure) on each cell.  In these coordinates

* the internal energy is ``sum (1/J)^m dY^(1-m) exp((m-1) psi(mid)) / (m(m-1))``,
* the cross term is ``(1/J) sum (cell average of P)`` with two-point Gauss,
* W2^2 to the previous iterate is the exact L2 distance of the
  piecewise-linear quantile functions,

and each step is a strictly convex problem (for convex P and psi = 0)
solved by a damped Newton method with a tridiagonal Hessian.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import solve_banded

from ..domain import ReferencePotential
from ..measures import GridMeasure, QuantileRep, to_density, to_quantile
from ..mcalc import MParam
from ._fns import potential_fns, psi_fns
from .trace import FlowTrace, reference_measure

_GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


@dataclass(frozen=True)
class JkoConfig:
    delta: float = 1e-3
    inner_tol: float = 1e-7
    max_inner_iters: int = 200
    eps_X: float = 1e-12

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.eps_X > 0:
            raise ValueError("eps_X must be positive")


class JkoError(RuntimeError):
    def __init__(self, msg, last, grad_norm):
        super().__init__(f"{msg} (gradient norm {grad_norm:.3e})")
        self.last = last
        self.grad_norm = grad_norm


class QuantileEnergy:
    """H_m(.|nu) of a piecewise-uniform measure given by its edges."""

    def __init__(self, ref: ReferencePotential, p: MParam, J: int):
        self.ref, self.p, self.J = ref, p, int(J)
        d = ref.domain
        self.a, self.b = d.a, d.b
        self.psi = psi_fns(d)
        self.P = potential_fns(ref)
        self.flat = bool(np.all(d.psi == 0))
        self.e_ref = float(np.sum(ref.sigma**p.m * d.cell_volume)) / p.m

    def __call__(self, Y, with_grad=False, with_hess=False):
        m, J = self.p.m, self.J
        s = np.diff(Y)
        if np.any(s <= 0):
            return (math.inf, None, None) if (with_grad or with_hess) else math.inf
        c = (1.0 / J) ** m / (m * (m - 1.0))
        mid = 0.5 * (Y[:-1] + Y[1:])
        if self.flat:
            B = np.ones_like(s)
        else:
            B = np.exp((m - 1.0) * self.psi[0](mid))
        A = s ** (1.0 - m)
        e_int = c * float(np.sum(A * B))
        P, P1, P2 = self.P
        xq = [Y[:-1] + t * s for t in _GAUSS]
        e_cross = float(np.sum(P(xq[0]) + P(xq[1]))) * 0.5 / J
        val = e_int + e_cross + self.e_ref
        if not (with_grad or with_hess):
            return val
        g = np.zeros(J + 1)
        hd = np.zeros(J + 1)   # diagonal
        ho = np.zeros(J)       # off-diagonal (k, k+1)
        # internal energy: f(s, mu) = c A(s) B(mu)
        fs = c * (1.0 - m) * s ** (-m) * B
        fss = c * (1.0 - m) * (-m) * s ** (-m - 1.0) * B
        if self.flat:
            fmu = fmumu = fsmu = np.zeros_like(s)
        else:
            p1 = self.psi[1](mid)
            p2 = self.psi[2](mid)
            fmu = c * A * B * (m - 1.0) * p1
            fmumu = c * A * B * ((m - 1.0) ** 2 * p1 * p1 + (m - 1.0) * p2)
            fsmu = fs * (m - 1.0) * p1
        # d/dY_left = -d_s + d_mu/2, d/dY_right = d_s + d_mu/2
        g[:-1] += -fs + 0.5 * fmu
        g[1:] += fs + 0.5 * fmu
        hll = fss - fsmu + 0.25 * fmumu
        hrr = fss + fsmu + 0.25 * fmumu
        hlr = -fss + 0.25 * fmumu
        hd[:-1] += hll
        hd[1:] += hrr
        ho += hlr
        # cross term: (1/J) * 1/2 * sum_q P(Y_l + t_q s)
        for t, x in zip(_GAUSS, xq):
            d1 = 0.5 / J * P1(x)
            d2 = 0.5 / J * P2(x)
            g[:-1] += d1 * (1 - t)
            g[1:] += d1 * t
            hd[:-1] += d2 * (1 - t) ** 2
            hd[1:] += d2 * t * t
            ho += d2 * t * (1 - t)
        return val, g, (hd, ho)


def _w2sq_terms(Y, Y0, J):
    """(1/J) sum (d_j^2 + d_j d_j+1 + d_j+1^2)/3 with gradient and Hessian."""
    dY = Y - Y0
    a, b = dY[:-1], dY[1:]
    val = float(np.sum(a * a + a * b + b * b)) / (3.0 * J)
    g = np.zeros_like(Y)
    g[:-1] += (2 * a + b) / (3.0 * J)
    g[1:] += (2 * b + a) / (3.0 * J)
    hd = np.zeros_like(Y)
    hd[:-1] += 2.0 / (3.0 * J)
    hd[1:] += 2.0 / (3.0 * J)
    ho = np.full(Y.size - 1, 1.0 / (3.0 * J))
    return val, g, (hd, ho)


def w2sq_edges(Y, Y0) -> float:
    return _w2sq_terms(np.asarray(Y, float), np.asarray(Y0, float), len(Y) - 1)[0]


def _edges_of(q: QuantileRep, a: float, b: float) -> np.ndarray:
    E = np.array(q.cell_edges(), dtype=float)
    return np.clip(E, a, b)


def _minimize(energy: QuantileEnergy, Y_init, Y_prev, delta, cfg: JkoConfig):
    """Damped Newton with an active set for the wall bounds."""
    J, a, b = energy.J, energy.a, energy.b
    lam = 0.0 if delta is None else 1.0 / (2.0 * delta)

    def F(Y, derivs=False):
        if derivs:
            v, g, (hd, ho) = energy(Y, with_grad=True, with_hess=True)
            if lam:
                w, wg, (wd, wo) = _w2sq_terms(Y, Y_prev, J)
                v, g, hd, ho = v + lam * w, g + lam * wg, hd + lam * wd, ho + lam * wo
            return v, g, hd, ho
        v = energy(Y)
        if lam and math.isfinite(v):
            v += lam * _w2sq_terms(Y, Y_prev, J)[0]
        return v

    Y = np.array(Y_init, dtype=float)
    f0 = F(Y)
    gnorm = math.inf
    for _ in range(cfg.max_inner_iters):
        f, g, hd, ho = F(Y, derivs=True)
        free = np.ones(J + 1, dtype=bool)
        wall = 1e-14 * (b - a)
        if Y[0] <= a + wall and g[0] > 0:
            free[0] = False
        if Y[-1] >= b - wall and g[-1] < 0:
            free[-1] = False
        # gradient in the quantile metric: J * dF/dY
        gnorm = float(np.max(np.abs(g[free]))) * J
        if gnorm < cfg.inner_tol:
            return Y, f, gnorm
        idx = np.nonzero(free)[0]
        gd = hd[idx]
        go = ho[idx[:-1]] if idx.size > 1 else np.zeros(0)
        # off-diagonals only couple consecutive free indices
        if idx.size > 1:
            go = np.where(np.diff(idx) == 1, ho[np.minimum(idx[:-1], J - 1)], 0.0)
        dirn = None
        if np.all(gd > 0):
            ab = np.zeros((3, idx.size))
            ab[0, 1:] = go
            ab[1] = gd
            ab[2, :-1] = go
            try:
                step = solve_banded((1, 1), ab, -g[idx])
                if np.all(np.isfinite(step)) and float(step @ g[idx]) < 0:
                    dirn = step
            except (np.linalg.LinAlgError, ValueError):
                dirn = None
        if dirn is None:
            dirn = -g[idx] / np.maximum(np.abs(gd), 1e-300)
        D = np.zeros(J + 1)
        D[idx] = dirn
        # largest step keeping cells open and edges inside the walls
        dS = np.diff(D)
        s = np.diff(Y)
        shrink = dS < 0
        amax = 1.0
        if shrink.any():
            amax = min(amax, float(np.min(0.99 * (s[shrink] - cfg.eps_X * s[shrink]) / -dS[shrink])))
        # edges crossing a wall are projected back onto it (projected Newton)
        alpha = amax
        slope = float(g @ D)
        if -slope <= 1e-14 * (1.0 + abs(f)) and gnorm < 1e3 * cfg.inner_tol:
            # Newton decrement at rounding level: nothing left to gain
            return Y, f, gnorm
        while alpha > 1e-16:
            Yn = Y + alpha * D
            Yn[0], Yn[-1] = max(Yn[0], a), min(Yn[-1], b)
            fn = F(Yn)
            if fn <= f + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            if gnorm < 1e3 * cfg.inner_tol or abs(slope) < 1e-15 * (1 + abs(f)):
                return Y, f, gnorm
            raise JkoError("line search failed", Y, gnorm)
        if abs(f - fn) <= 1e-16 * (1 + abs(f)) and alpha < 1e-8:
            return Yn, fn, gnorm
        Y = Yn
    f = F(Y)
    if f <= f0 and gnorm < 1e3 * cfg.inner_tol:
        return Y, f, gnorm
    raise JkoError(f"no convergence after {cfg.max_inner_iters} iterations", Y, gnorm)


def jko_step(mu_k: QuantileRep, ref: ReferencePotential, p: MParam, cfg: JkoConfig,
             energy: QuantileEnergy | None = None) -> QuantileRep:
    """One minimizing-movement step from ``mu_k``."""
    d = ref.domain
    if energy is None:
        energy = QuantileEnergy(ref, p, mu_k.J)
    Y0 = _edges_of(mu_k, d.a, d.b)
    Y, _, _ = _minimize(energy, Y0, Y0, cfg.delta, cfg)
    return QuantileRep.from_edges(Y)


def jko_objective(q: QuantileRep, prev: QuantileRep, ref, p, cfg: JkoConfig) -> float:
    """``H(q) + W2(q, prev)^2 / (2 delta)`` in quantile coordinates."""
    d = ref.domain
    e = QuantileEnergy(ref, p, q.J)
    return e(_edges_of(q, d.a, d.b)) + w2sq_edges(_edges_of(q, d.a, d.b),
                                                  _edges_of(prev, d.a, d.b)) / (2 * cfg.delta)


def quantile_energy(q: QuantileRep, ref, p) -> float:
    d = ref.domain
    return QuantileEnergy(ref, p, q.J)(_edges_of(q, d.a, d.b))


def discrete_ground_state(ref: ReferencePotential, p: MParam, J: int,
                          cfg: JkoConfig | None = None) -> QuantileRep:
    """Minimiser of the quantile-coordinate energy (the scheme's fixed point)."""
    cfg = cfg or JkoConfig()
    d = ref.domain
    q0 = to_quantile(reference_measure(ref), J)
    energy = QuantileEnergy(ref, p, J)
    Y, _, _ = _minimize(energy, _edges_of(q0, d.a, d.b), None, None, cfg)
    return QuantileRep.from_edges(Y)


def jko_trajectory(mu0, ref: ReferencePotential, p: MParam, cfg: JkoConfig, T: float,
                   J: int = 256, record_every: int = 1, with_I: bool = True) -> FlowTrace:
    """Repeated JKO steps up to time ``T``; ``mu0`` is a GridMeasure or QuantileRep."""
    d = ref.domain
    q = mu0 if isinstance(mu0, QuantileRep) else to_quantile(mu0, J)
    energy = QuantileEnergy(ref, p, q.J)
    n = int(round(T / cfg.delta))
    trace = FlowTrace(label="jko")
    H0 = energy(_edges_of(q, d.a, d.b))
    trace.append(0.0, to_density(q, d), ref, H=H0, q=q, with_I=with_I)
    prev = last = q
    for k in range(1, n + 1):
        q = jko_step(prev, ref, p, cfg, energy)
        if k % record_every == 0 or k == n:
            step = math.sqrt(max(w2sq_edges(q.edges, _edges_of(last, d.a, d.b)), 0.0))
            trace.append(k * cfg.delta, to_density(q, d), ref,
                         H=energy(q.edges), q=q, with_I=with_I)
            trace.step_w2.append(step)
            last = q
        prev = q
    return trace
