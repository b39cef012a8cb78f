"""Conservative finite-volume solver for the weighted porous-medium /
fast-diffusion equation with drift

    d_t rho = (1/m) Lap_w(rho^m) + div_w(rho grad P)

written as ``d_t(rho w) = d_x(w rho d_x xi)`` with the chemical potential
``xi = rho^(m-1)/(m-1) + P`` and ``P = -sigma^(m-1)/(m-1)``.

Fluxes at faces are ``-(w_f/h) rho_up (xi_R - xi_L)`` where ``rho_up`` is
taken on the side the velocity comes from.  This keeps mass exactly,
keeps rho >= 0 under the explicit step bound (and for any dt in the
semi-implicit mode), and makes the normalised reference an exact discrete
steady state.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.sparse import coo_matrix, identity
from scipy.sparse.linalg import spsolve
from scipy.integrate import quad
from scipy.special import beta

from ..domain import ReferencePotential
from ..measures import GridMeasure
from ..mcalc import MParam
from .trace import FlowTrace

C_STAB = 0.5


class StabilityError(ValueError):
    def __init__(self, dt, dt_max):
        super().__init__(f"dt={dt!r} exceeds the explicit stability bound; use dt <= {dt_max!r}")
        self.dt_max = dt_max


def _chemical(rho, P, m):
    if m < 1:
        if np.any(rho <= 0):
            raise ValueError("fast diffusion (m < 1) needs a strictly positive density")
    return rho ** (m - 1.0) / (m - 1.0) + P


def _faces(d):
    w = d.weight
    if d.periodic:
        return 0.5 * (w + np.roll(w, -1))
    return 0.5 * (w[:-1] + w[1:])


def _diff(v, periodic):
    return (np.roll(v, -1) - v) if periodic else np.diff(v)


def _fluxes(rho, xi, wf, h, periodic):
    """Mass flux through each face, positive to the right."""
    dxi = _diff(xi, periodic)
    right = np.roll(rho, -1) if periodic else rho[1:]
    left = rho if periodic else rho[:-1]
    up = np.where(dxi < 0, left, right)
    return -(wf / h) * up * dxi


def _divergence(F, periodic, M):
    """``F_{i-1/2} - F_{i+1/2}`` with no-flux walls on segments."""
    if periodic:
        return np.roll(F, 1) - F
    out = np.zeros(M)
    out[:-1] -= F
    out[1:] += F
    return out


def stable_dt(rho: np.ndarray, ref: ReferencePotential, p: MParam) -> float:
    """Largest explicit dt keeping rho >= 0 and respecting the diffusive bound."""
    d = ref.domain
    m, h = p.m, d.h
    xi = _chemical(rho, ref.potential(), m)
    wf = _faces(d)
    dxi = _diff(xi, d.periodic)
    # outflow from node i through each face where i is upwind
    out = np.zeros(d.M)
    if d.periodic:
        out += wf * np.maximum(-dxi, 0)            # right face, i -> i+1
        out += np.roll(wf * np.maximum(dxi, 0), 1)  # left face, i -> i-1
    else:
        out[:-1] += wf * np.maximum(-dxi, 0)
        out[1:] += wf * np.maximum(dxi, 0)
    with np.errstate(divide="ignore", over="ignore"):
        pos = np.where(out > 0, h * h * d.weight / out, np.inf)
    diff_rate = float(np.max(np.where(rho > 0, rho ** (m - 1.0), 0.0)))
    wratio = float(np.max(wf) / np.min(d.weight))
    diffusive = h * h / (diff_rate * wratio) if diff_rate > 0 else np.inf
    return float(min(pos.min(), diffusive))


def pde_step(rho: GridMeasure, ref: ReferencePotential, p: MParam, dt: float,
             mode: str = "explicit") -> GridMeasure:
    """Advance one step of length ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = ref.domain
    m, h = p.m, d.h
    r = rho.rho
    P = ref.potential()
    wf = _faces(d)
    mass = r * d.cell_volume
    if mode == "explicit":
        dt_max = C_STAB * stable_dt(r, ref, p)
        if dt > dt_max * (1 + 1e-12):
            raise StabilityError(dt, dt_max)
        F = _fluxes(r, _chemical(r, P, m), wf, h, d.periodic)
        new = mass + dt * _divergence(F, d.periodic, d.M)
        new = np.maximum(new, 0.0)
    elif mode == "semi-implicit":
        new = _semi_implicit(mass, r, P, wf, d, m, dt)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return GridMeasure(d, new / d.cell_volume, check=False)


def _semi_implicit(mass, r, P, wf, d, m, dt):
    """Upwind flux with the new density and the old chemical potential."""
    h, M = d.h, d.M
    xi = _chemical(r, P, m)
    dxi = _diff(xi, d.periodic)
    vol = d.cell_volume
    # flux_f = -(w_f/h) dxi_f * (mass_up / vol_up): coefficient on each side
    c = -(wf / h) * dxi
    cl = np.where(dxi < 0, c, 0.0)  # multiplies new mass of the left node / vol
    cr = np.where(dxi < 0, 0.0, c)  # multiplies new mass of the right node / vol
    if d.periodic:
        il, ir = np.arange(M), (np.arange(M) + 1) % M
    else:
        il, ir = np.arange(M - 1), np.arange(1, M)
    # A mass_new = mass_old, with A = I + dt * (outflow/inflow operator)
    rows, cols, vals = [], [], []
    for f_coef, src in ((cl, il), (cr, ir)):
        # flux F_f = f_coef * mass_new[src]/vol[src]; left node loses F, right gains F
        k = f_coef / vol[src] * dt
        rows += [il, ir]
        cols += [src, src]
        vals += [k, -k]
    B = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(M, M))
    new = spsolve((identity(M) + B).tocsc(), mass)
    return np.maximum(new, 0.0)


def pde_run(mu0: GridMeasure, ref: ReferencePotential, p: MParam, T: float,
            dt: float | None = None, mode: str = "explicit", record_every: float | None = None,
            with_I: bool = True) -> FlowTrace:
    """Integrate to time ``T``; explicit mode sub-steps adaptively.

    ``record_every`` sets the spacing of trace entries (default: T/50).
    """
    if record_every is None:
        record_every = T / 50 if T > 0 else 1.0
    trace = FlowTrace(label=f"pde-{mode}")
    trace.append(0.0, mu0, ref, with_I=with_I)
    marks = np.arange(1, int(math.floor(T / record_every + 1e-9)) + 1) * record_every
    if marks.size == 0 or marks[-1] < T - 1e-12:
        marks = np.append(marks, T)
    mu, t = mu0, 0.0
    for target in marks:
        while t < target - 1e-14:
            step = target - t
            if mode == "explicit":
                step = min(step, C_STAB * stable_dt(mu.rho, ref, p) * 0.999)
                if dt is not None:
                    step = min(step, dt)
            else:
                step = min(step, dt if dt is not None else record_every)
            mu = pde_step(mu, ref, p, step, mode)
            t += step
        trace.append(t, mu, ref, with_I=with_I)
    return trace


def barenblatt(m: float, t: float, x, mass: float = 1.0, x0: float = 0.0) -> np.ndarray:
    """Source-type solution of ``d_t rho = (1/m) (rho^m)_xx`` on the line (m > 1).

    This is the standard profile ``U(tau, x)`` of ``u_t = (u^m)_xx`` taken at
    ``tau = t/m``:
    ``U = tau^-a (C - k x^2 tau^-2a)_+^(1/(m-1))`` with ``a = 1/(m+1)`` and
    ``k = a (m-1)/(2m)``; C fixes the mass.
    """
    if m <= 1:
        raise ValueError("barenblatt profile implemented for m > 1")
    if not t > 0:
        raise ValueError("t must be positive")
    a = 1.0 / (m + 1.0)
    k = a * (m - 1.0) / (2.0 * m)
    q = 1.0 / (m - 1.0)
    # int (C - k y^2)_+^q dy = C^(q+1/2) k^(-1/2) B(1/2, q+1)
    C = (mass * math.sqrt(k) / beta(0.5, q + 1.0)) ** (1.0 / (q + 0.5))
    tau = t / m
    y = (np.asarray(x, dtype=float) - x0) * tau ** (-a)
    return tau ** (-a) * np.maximum(C - k * y * y, 0.0) ** q


def barenblatt_measure(d, m: float, t: float, x0: float = 0.0) -> GridMeasure:
    """Barenblatt profile as cell averages on the grid (psi must vanish)."""
    e = d.edges
    vals = np.array([quad(lambda z: float(barenblatt(m, t, z, x0=x0)), e[i], e[i + 1])[0]
                     for i in range(d.M)])
    return GridMeasure(d, vals / vals.sum() / d.cell_volume)
