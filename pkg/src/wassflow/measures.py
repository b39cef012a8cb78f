"""Probability measures on a :class:`Domain1D` and their quantile form.

``GridMeasure.rho`` is the density with respect to ``omega`` so the mass of
cell i is ``rho_i exp(-psi_i) h``.  ``QuantileRep`` stores the inverse CDF
at ``s_j = (j - 1/2)/J`` and, when known, at the cell boundaries ``k/J``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

import numpy as np
from scipy.integrate import quad

from .domain import Domain1D, ReferencePotential
from .mcalc import MParam, exp_m

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridMeasure:
    domain: Domain1D
    rho: np.ndarray
    atoms: tuple = ()
    check: bool = True
    total_mass: float = field(init=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float).copy()
        if rho.shape != (self.domain.M,):
            raise ValueError("rho must have one value per node")
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        if np.any(~np.isfinite(rho)) or np.any(rho < 0):
            raise ValueError("density must be finite and nonnegative")
        for x, w in atoms:
            if not w > 0:
                raise ValueError("atom masses must be positive")
            if not self.domain.a <= x <= self.domain.b:
                raise ValueError(f"atom at {x} lies outside the domain")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "atoms", atoms)
        total = float(np.sum(rho * self.domain.cell_volume)) + sum(w for _, w in atoms)
        object.__setattr__(self, "total_mass", total)
        if self.check and abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")

    @property
    def cell_mass(self) -> np.ndarray:
        return self.rho * self.domain.cell_volume

    @property
    def atom_mass(self) -> float:
        return sum(w for _, w in self.atoms)

    @property
    def lebesgue_density(self) -> np.ndarray:
        return self.rho * self.domain.weight

    def moment(self, k: int) -> float:
        x = self.domain.x
        return float(np.sum(x**k * self.cell_mass) + sum(w * a**k for a, w in self.atoms))

    @property
    def mean(self) -> float:
        return self.moment(1) / self.total_mass

    @property
    def variance(self) -> float:
        mu = self.mean
        x = self.domain.x
        v = np.sum((x - mu) ** 2 * self.cell_mass) + sum(w * (a - mu) ** 2 for a, w in self.atoms)
        return float(v) / self.total_mass

    def l1(self, other: "GridMeasure") -> float:
        """L1 distance of the absolutely continuous parts w.r.t. omega."""
        if other.domain.M != self.domain.M:
            raise ValueError("grids differ")
        return float(np.sum(np.abs(self.rho - other.rho) * self.domain.cell_volume))

    def to_csv(self) -> str:
        lines = ["x,rho"]
        lines += [f"{x!r},{r!r}" for x, r in zip(self.domain.x, self.rho)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"domain": self.domain.describe(),
                           "x": self.domain.x.tolist(), "rho": self.rho.tolist(),
                           "atoms": [list(a) for a in self.atoms]}, sort_keys=True)


def from_lebesgue(d: Domain1D, f, atoms=()) -> GridMeasure:
    """Normalise a nonnegative Lebesgue density (nodal values) to a measure."""
    f = np.asarray(f, dtype=float)
    atom_mass = sum(w for _, w in atoms)
    total = float(np.sum(f) * d.h)
    if not total > 0:
        raise ValueError("density has no mass")
    rho = f * (1.0 - atom_mass) / total / d.weight
    return GridMeasure(d, rho, atoms)


def bump_mixture(d: Domain1D, centers, widths, weights, floor: float = 0.0) -> GridMeasure:
    """Mixture of Gaussian bumps (plus a uniform floor) on the grid."""
    x = d.x
    f = np.full_like(x, float(floor))
    for c, s, w in zip(centers, widths, weights):
        f += w * np.exp(-0.5 * ((x - c) / s) ** 2) / s
    return from_lebesgue(d, f)


@dataclass(frozen=True, eq=False)
class QuantileRep:
    """Inverse CDF samples ``X_j = F^-1((j - 1/2)/J)``.

    ``edges`` (length J+1), when present, are ``F^-1(k/J)`` and the measure
    is read as uniform mass ``1/J`` on each ``[edges[k], edges[k+1]]``.
    """

    X: np.ndarray
    edges: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).copy()
        if X.ndim != 1 or X.size < 1:
            raise ValueError("X must be a nonempty vector")
        if np.any(np.diff(X) <= 0):
            raise ValueError("quantile positions must be strictly increasing")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.edges is not None:
            E = np.asarray(self.edges, dtype=float).copy()
            if E.shape != (X.size + 1,) or np.any(np.diff(E) <= 0):
                raise ValueError("edges must be J+1 strictly increasing values")
            E.setflags(write=False)
            object.__setattr__(self, "edges", E)

    @property
    def J(self) -> int:
        return self.X.size

    @property
    def s(self) -> np.ndarray:
        return (np.arange(self.J) + 0.5) / self.J

    @classmethod
    def from_edges(cls, edges) -> "QuantileRep":
        E = np.asarray(edges, dtype=float)
        return cls(0.5 * (E[:-1] + E[1:]), E)

    def cell_edges(self) -> np.ndarray:
        """Edges if stored, else reconstructed from midpoints of X."""
        if self.edges is not None:
            return self.edges
        X = self.X
        if X.size == 1:
            return np.array([X[0] - 1e-9, X[0] + 1e-9])
        mid = 0.5 * (X[:-1] + X[1:])
        return np.concatenate([[X[0] - (mid[0] - X[0])], mid, [X[-1] + (X[-1] - mid[-1])]])

    @property
    def mean(self) -> float:
        E = self.cell_edges()
        return float(np.mean(0.5 * (E[:-1] + E[1:])))

    @property
    def variance(self) -> float:
        E = self.cell_edges()
        a, b = E[:-1], E[1:]
        second = np.mean((a * a + a * b + b * b) / 3.0)
        return float(second - self.mean**2)


def _cdf_nodes(mu: GridMeasure):
    d = mu.domain
    F = np.concatenate([[0.0], np.cumsum(mu.cell_mass)])
    F /= F[-1]
    return d.edges, F


def _inverse_cdf(mu: GridMeasure, s: np.ndarray) -> np.ndarray:
    e, F = _cdf_nodes(mu)
    s = np.asarray(s, dtype=float)
    k = np.searchsorted(F, s, side="left")
    k = np.clip(k, 1, len(F) - 1)
    lo, hi = F[k - 1], F[k]
    frac = np.where(hi > lo, (s - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
    return e[k - 1] + frac * (e[k] - e[k - 1])


def to_quantile(mu: GridMeasure, J: int) -> QuantileRep:
    """Generalised inverse CDF of the piecewise-constant density."""
    if mu.atoms:
        raise ValueError("atoms present: smooth the measure before converting to quantiles")
    J = int(J)
    s = (np.arange(J) + 0.5) / J
    X = _inverse_cdf(mu, s)
    e, F = _cdf_nodes(mu)
    pos = np.nonzero(np.diff(F) > 0)[0]
    lo_end, hi_end = e[pos[0]], e[pos[-1] + 1]
    inner = _inverse_cdf(mu, np.arange(1, J) / J)
    edges = np.concatenate([[lo_end], inner, [hi_end]])
    if np.any(np.diff(edges) <= 0):
        edges = None
    return QuantileRep(X, edges)


def to_density(q: QuantileRep, d: Domain1D) -> GridMeasure:
    """Deposit mass ``1/J`` uniformly on each quantile cell into grid cells."""
    E = np.clip(q.cell_edges(), d.a, d.b)
    levels = np.arange(q.J + 1) / q.J
    keep = np.concatenate([[True], np.diff(E) > 0])
    G = np.interp(d.edges, E[keep], levels[keep], left=0.0, right=1.0)
    if not keep.all():
        # cells squeezed flat onto a wall still carry their mass
        G[0], G[-1] = 0.0, 1.0
    mass = np.diff(G)
    return GridMeasure(d, mass / d.cell_volume)


def _profile_variance(m: float) -> float:
    """Variance of the density proportional to exp_m(-y^2/2)."""
    if m > 1:
        R = math.sqrt(2.0 / (m - 1.0))
        lim = (-R, R)
    else:
        if m <= 1.0 / 3.0:
            raise ValueError("m-Gaussian variance is infinite for m <= 1/3")
        lim = (-np.inf, np.inf)

    def g(y):
        return float(exp_m(m, -0.5 * y * y))

    z = quad(g, *lim, limit=200)[0]
    s2 = quad(lambda y: y * y * g(y), *lim, limit=200)[0]
    return s2 / z


def _profile_tail(m: float, R: float) -> float:
    """Mass fraction of exp_m(-y^2/2) outside |y| <= R (m < 1)."""
    def g(y):
        return float(exp_m(m, -0.5 * y * y))

    z = quad(g, -np.inf, np.inf, limit=200)[0]
    return 2 * quad(g, R, np.inf, limit=200)[0] / z


def m_gaussian_scale(m: float) -> float:
    """Constant C1 making ``exp_m(-C1 (x-v)^2/(2V))`` have variance V."""
    return _profile_variance(m)


def m_gaussian(p: MParam, v: float, V: float, d: Domain1D, tail_tol: float = 1e-8):
    """m-Gaussian with mean ``v`` and variance ``V`` on the grid.

    Returns ``(mu, ref)`` where ``ref`` is the reference potential whose
    ``exp_m(-Psi)`` equals the normalised density (requires psi = 0).
    """
    m = p.m
    if not V > 0:
        raise ValueError("variance must be positive")
    C1 = m_gaussian_scale(m)
    scale = math.sqrt(V / C1)
    lo, hi = (d.a - v) / scale, (d.b - v) / scale
    if m > 1:
        R = math.sqrt(2.0 / (m - 1.0)) * scale
        if v - R < d.a or v + R > d.b:
            raise ValueError(f"support [{v - R}, {v + R}] exceeds the domain; need radius {R}")
    elif not d.periodic:
        tail = _profile_tail(m, min(-lo, hi))
        if tail > tail_tol:
            need = scale
            while _profile_tail(m, need / scale) > tail_tol:
                need *= 1.5
            raise ValueError(f"domain loses mass {tail:.3g} > {tail_tol}; "
                             f"need radius about {need:.4g} around the mean")
    u = C1 * (d.x - v) ** 2 / (2 * V)
    f = exp_m(m, -u)
    A = 1.0 / (np.sum(f) * d.h)
    mu = from_lebesgue(d, f)
    ref = None
    if np.all(d.psi == 0):
        k = A ** (m - 1.0)
        Psi = k * u - (k - 1.0) / (m - 1.0)
        src = f"{k * C1 / (2 * V)!r}*(x - ({v!r}))**2 - ({(k - 1.0) / (m - 1.0)!r})"
        ref = ReferencePotential(d, p, Psi, Psi_src=src)
    return mu, ref
