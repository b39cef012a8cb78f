"""The 1-D weighted model space and reference potentials on it.

A :class:`Domain1D` is a uniform cell-centred grid on a segment or a circle
carrying the base weight ``omega = exp(-psi) dx``.  A
:class:`ReferencePotential` fixes ``nu = sigma omega`` with
``sigma = exp_m(-Psi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .expr import Expr, as_values
from .mcalc import MParam, exp_m


@dataclass(frozen=True, eq=False)
class Domain1D:
    kind: str
    a: float
    b: float
    M: int
    psi: np.ndarray = None
    psi_src: object = 0.0

    def __post_init__(self):
        if self.kind not in ("segment", "circle"):
            raise ValueError(f"kind must be 'segment' or 'circle', got {self.kind!r}")
        if not (self.b > self.a) or int(self.M) < 3:
            raise ValueError("need b > a and M >= 3")
        object.__setattr__(self, "M", int(self.M))
        psi = self.psi
        if psi is None:
            psi = as_values(self.psi_src, self.x)
        elif not isinstance(self.psi_src, (str, Expr)):
            # explicit samples: remember that no closed form is known
            object.__setattr__(self, "psi_src", None)
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (self.M,):
            raise ValueError("psi must have one value per node")
        w = np.exp(-psi)
        if not np.all(np.isfinite(w) & (w > 0)):
            raise ValueError("weight exp(-psi) must be finite and positive at every node")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.M

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def x(self) -> np.ndarray:
        return self.a + (np.arange(self.M) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        return self.a + np.arange(self.M + 1) * self.h

    @property
    def weight(self) -> np.ndarray:
        return np.exp(-self.psi)

    @property
    def cell_volume(self) -> np.ndarray:
        """omega-measure of each cell (midpoint rule)."""
        return self.weight * self.h

    @property
    def total_volume(self) -> float:
        return float(self.cell_volume.sum())

    @property
    def periodic(self) -> bool:
        return self.kind == "circle"

    def with_M(self, M: int) -> "Domain1D":
        if self.psi_src is None:
            coarse = Domain1D(self.kind, self.a, self.b, M, psi=np.zeros(M))
            return Domain1D(self.kind, self.a, self.b, M, psi=self.spline(self.psi)(coarse.x))
        return Domain1D(self.kind, self.a, self.b, M, psi_src=self.psi_src)

    def derivative(self, f: np.ndarray, order: int = 1):
        """Second-order finite differences of nodal values.

        Returns ``(values, boundary_flag)`` where the flag marks nodes that
        used one-sided stencils (segment endpoints).
        """
        f = np.asarray(f, dtype=float)
        h = self.h
        flag = np.zeros(self.M, dtype=bool)
        if self.periodic:
            fp, fm = np.roll(f, -1), np.roll(f, 1)
            if order == 1:
                return (fp - fm) / (2 * h), flag
            return (fp - 2 * f + fm) / h**2, flag
        out = np.empty_like(f)
        if order == 1:
            out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
            out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
            out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
        else:
            out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
            if self.M >= 4:
                out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
                out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
            else:
                out[0], out[-1] = out[1], out[-2]
        flag[0] = flag[-1] = True
        return out, flag

    def spline(self, f: np.ndarray) -> CubicSpline:
        xs = self.x
        if self.periodic:
            xs = np.append(xs, xs[0] + self.length)
            f = np.append(f, f[0])
            return CubicSpline(xs, f, bc_type="periodic")
        return CubicSpline(xs, f)

    def describe(self) -> dict:
        src = self.psi_src if isinstance(self.psi_src, (int, float, str)) else "samples"
        return {"kind": self.kind, "a": self.a, "b": self.b, "M": self.M, "psi": src}


def ric_N(d: Domain1D, p: MParam, i: int | None = None):
    """Weighted Ricci curvature ``psi'' - psi'^2/(N - n)`` of the flat line.

    With ``i`` given returns ``(value, boundary_flag)`` at that node;
    otherwise arrays over all nodes.  For ``N == n`` the value is
    ``psi''`` where ``psi' == 0`` and ``-inf`` elsewhere.
    """
    d1, flag = d.derivative(d.psi, 1)
    d2, _ = d.derivative(d.psi, 2)
    if p.N == p.n:
        ric = np.where(np.abs(d1) <= 1e-12, d2, -np.inf)
    else:
        ric = d2 - d1**2 / (p.N - p.n)
    if i is None:
        return ric, flag
    return float(ric[i]), bool(flag[i])


def k_modulus(Psi: np.ndarray, d: Domain1D, mask: np.ndarray | None = None) -> float:
    """Largest K with the midpoint inequality
    ``Psi(mid) <= (Psi(x)+Psi(y))/2 - K/8 |x-y|^2`` over node pairs.

    Pairs use nodes ``i, i+2g`` with midpoint node ``i+g`` (shorter arc on
    the circle) and both endpoints inside ``mask``.  ``Psi`` may also be a
    :class:`ReferencePotential`, in which case its M0 mask is used.
    """
    if isinstance(Psi, ReferencePotential):
        Psi, mask = Psi.Psi, Psi.M0_mask
    Psi = np.asarray(Psi, dtype=float)
    M = d.M
    if mask is None:
        mask = np.ones(M, dtype=bool)
    if not mask.any():
        raise ValueError("empty M0: no admissible node pairs")
    best = math.inf
    if d.periodic:
        for g in range(1, M // 4 + 1):
            i = np.arange(M)
            j, mid = (i + 2 * g) % M, (i + g) % M
            ok = mask[i] & mask[j] & mask[mid]
            if ok.any():
                gap = 0.5 * (Psi[i] + Psi[j]) - Psi[mid]
                best = min(best, float((8 * gap[ok] / (2 * g * d.h) ** 2).min()))
    else:
        for g in range(1, (M - 1) // 2 + 1):
            lo, mid, hi = Psi[:-2 * g], Psi[g:M - g], Psi[2 * g:]
            ok = mask[:-2 * g] & mask[2 * g:]
            if ok.any():
                gap = 0.5 * (lo + hi) - mid
                best = min(best, float((8 * gap[ok] / (2 * g * d.h) ** 2).min()))
    return best


@dataclass(frozen=True, eq=False)
class ReferencePotential:
    """Reference measure ``nu = exp_m(-Psi) omega`` on a domain."""

    domain: Domain1D
    p: MParam
    Psi: np.ndarray
    Psi_src: object = None
    sigma: np.ndarray = field(init=False)
    M0_mask: np.ndarray = field(init=False)
    K_hat: float = field(init=False)

    def __post_init__(self):
        Psi = np.asarray(self.Psi, dtype=float).copy()
        m = self.p.m
        if Psi.shape != (self.domain.M,):
            raise ValueError("Psi must have one value per node")
        if m < 1:
            if np.any(Psi <= -1.0 / (1.0 - m)):
                raise ValueError("need Psi > -1/(1-m) everywhere when m < 1")
            mask = np.ones_like(Psi, dtype=bool)
        else:
            mask = Psi < 1.0 / (m - 1.0)
        if not mask.any():
            raise ValueError("M0 is empty")
        sigma = exp_m(m, -Psi)
        sigma[~mask] = 0.0
        for arr in (Psi, sigma, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "Psi", Psi)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "M0_mask", mask)
        object.__setattr__(self, "K_hat", k_modulus(Psi, self.domain, mask))

    @classmethod
    def from_expr(cls, d: Domain1D, p: MParam, Psi) -> "ReferencePotential":
        return cls(d, p, as_values(Psi, d.x), Psi_src=Psi)

    @property
    def mass(self) -> float:
        return float(np.sum(self.sigma * self.domain.cell_volume))

    @property
    def Psi_fn(self):
        """Callable ``x -> Psi(x)`` (expression if known, spline otherwise)."""
        src = self.Psi_src
        if isinstance(src, str):
            return Expr(src)
        if isinstance(src, (int, float)):
            return lambda x: np.full_like(np.asarray(x, dtype=float), float(src))
        if isinstance(src, Expr):
            return src
        return self.domain.spline(self.Psi)

    def potential(self) -> np.ndarray:
        """Nodal chemical-potential contribution ``-sigma^(m-1)/(m-1)``.

        Equals ``Psi - 1/(m-1)`` on M0 and 0 off M0 (m > 1).
        """
        m = self.p.m
        return np.where(self.M0_mask, self.Psi, 1.0 / (m - 1.0)) - 1.0 / (m - 1.0)

    def describe(self) -> dict:
        src = self.Psi_src if isinstance(self.Psi_src, (int, float, str)) else "samples"
        return {"Psi": src, "m": self.p.m, "n": self.p.n, "K_hat": self.K_hat,
                "mass": self.mass}


def renormalize_reference(ref: ReferencePotential):
    """Rescale ``nu`` to unit mass by changing Psi, not omega.

    ``exp_m(-Psi~) = c exp_m(-Psi)`` with ``c = 1/nu(M)`` is realised by
    ``Psi~ = c^(m-1) Psi - (c^(m-1) - 1)/(m-1)``, so the convexity modulus
    scales by ``c^(m-1)``.  Returns ``(new_ref, c)``.
    """
    mass = ref.mass
    if not (math.isfinite(mass) and mass > 0):
        raise ValueError(f"cannot renormalise reference of mass {mass}")
    m = ref.p.m
    c = 1.0 / mass
    k = c ** (m - 1.0)
    Psi = k * ref.Psi - (k - 1.0) / (m - 1.0)
    src = ref.Psi_src
    if isinstance(src, str):
        src = f"({k!r})*({src}) - ({(k - 1.0) / (m - 1.0)!r})"
    elif isinstance(src, (int, float)):
        src = k * src - (k - 1.0) / (m - 1.0)
    else:
        src = None
    return ReferencePotential(ref.domain, ref.p, Psi, Psi_src=src), c


def quadratic_reference(d: Domain1D, p: MParam, K: float, center: float = 0.0,
                        normalize: bool = True) -> ReferencePotential:
    """``Psi = K (x - center)^2 / 2 + c0`` with c0 chosen for unit mass.

    Shifting by a constant keeps the Hessian exactly K, unlike the
    multiplicative renormalisation.
    """
    m = p.m
    base = 0.5 * K * (d.x - center) ** 2
    vol = d.cell_volume
    if not normalize:
        return ReferencePotential(d, p, base, Psi_src=f"{K!r}*(x - ({center!r}))**2/2")

    def excess(c0):
        return float(np.sum(exp_m(m, -(base + c0)) * vol)) - 1.0

    if m < 1:
        lo = -1.0 / (1.0 - m) - base.min() + 1e-12
        hi = lo + 1.0
        while excess(hi) > 0:
            hi = lo + 2 * (hi - lo)
    else:
        hi = 1.0 / (m - 1.0) - base.min() - 1e-12
        lo = hi - 1.0
        while excess(lo) < 0:
            lo = hi - 2 * (hi - lo)
    c0 = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    src = f"{K!r}*(x - ({center!r}))**2/2 + ({c0!r})"
    return ReferencePotential(d, p, base + c0, Psi_src=src)


def support_radius_bound(ref: ReferencePotential) -> dict:
    """Radius ``{(2/K)(1/(m-1) - Psi(x0))}^(1/2)`` containing supp(nu), m > 1.

    ``x0`` is the discrete minimiser of Psi.  Also checks that every node
    with ``sigma > 0`` lies within that radius (up to one cell).
    """
    m, K = ref.p.m, ref.K_hat
    if m <= 1 or not K > 0:
        return {"applicable": False, "reason": "needs m > 1 and K > 0"}
    i0 = int(np.argmin(ref.Psi))
    x0 = float(ref.domain.x[i0])
    radius = math.sqrt((2.0 / K) * (1.0 / (m - 1.0) - ref.Psi[i0]))
    supp = ref.domain.x[ref.sigma > 0]
    reach = float(np.max(np.abs(supp - x0))) if supp.size else 0.0
    return {"applicable": True, "x0": x0, "radius": radius, "observed": reach,
            "holds": reach <= radius + ref.domain.h}


def tail_moment(ref: ReferencePotential, power: float, x0: float | None = None) -> float:
    """``sum |x - x0|^power sigma omega`` over the grid."""
    d = ref.domain
    if x0 is None:
        x0 = float(d.x[np.argmin(ref.Psi)])
    return float(np.sum(np.abs(d.x - x0) ** power * ref.sigma * d.cell_volume))
