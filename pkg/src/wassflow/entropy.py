"""Entropy functionals on grid measures.

``h_m`` is the m-relative entropy

    1/(m(m-1)) int (rho^m + (m-1) sigma^m) domega
        - 1/(m-1) int sigma^(m-1) dmu + H(inf) mu^s(M)

with ``H(inf) = 0`` for m < 1 and ``+inf`` for m > 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .domain import ReferencePotential
from .measures import GridMeasure
from .mcalc import MParam, e_m, ln_m
from .transport import w2
from .measures import to_quantile

OVERFLOW = 1e300
RHO_FLOOR = 1e-12


@dataclass(frozen=True)
class EntropyValue:
    value: float
    ac_part: float
    singular_part: float
    breakdown: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"value": enc(self.value), "ac_part": enc(self.ac_part),
                "singular_part": enc(self.singular_part),
                "breakdown": {k: enc(v) for k, v in self.breakdown.items()}}


def _guard(*vals) -> bool:
    return all(math.isfinite(v) and abs(v) <= OVERFLOW for v in vals)


def _no_atoms(mu: GridMeasure):
    if mu.atoms:
        raise ValueError("measure has atoms; Tsallis/Renyi need an absolutely continuous measure")


def tsallis(p, mu: GridMeasure) -> float:
    """``-sum e_m(rho) omega``."""
    _no_atoms(mu)
    return float(-np.sum(e_m(p, mu.rho) * mu.domain.cell_volume))


def renyi(p, mu: GridMeasure) -> float:
    """``S_N = -sum rho^(1 - 1/N) omega`` (note ``1 - 1/N = m``)."""
    _no_atoms(mu)
    m = p.m if isinstance(p, MParam) else float(p)
    return float(-np.sum(mu.rho**m * mu.domain.cell_volume))


def _sigma_pow_at(ref: ReferencePotential, x: float) -> float:
    """``sigma(x)^(m-1)`` at an arbitrary point, from Psi."""
    m = ref.p.m
    psi_x = float(np.asarray(ref.Psi_fn(np.array([x])))[0])
    return max(1.0 - (m - 1.0) * psi_x, 0.0)


def h_m(p: MParam, mu: GridMeasure, ref: ReferencePotential) -> EntropyValue:
    m = p.m
    vol = mu.domain.cell_volume
    sig = ref.sigma
    with np.errstate(over="ignore", invalid="ignore"):
        sig_m = float(np.sum(sig**m * vol))
        if not _guard(sig_m):
            raise ValueError("sigma is not in L^m(omega) on this grid")
        rho_m = float(np.sum(mu.rho**m * vol))
        if m < 1:
            sp = sig ** (m - 1.0)
        else:
            sp = np.where(sig > 0, sig ** (m - 1.0), 0.0)
        cross_ac = float(np.sum(sp * mu.rho * vol))
    internal = rho_m / (m * (m - 1.0))
    reference = sig_m / m
    cross_ac = -cross_ac / (m - 1.0)
    atom_mass = mu.atom_mass
    cross_atoms = -sum(w * _sigma_pow_at(ref, x) for x, w in mu.atoms) / (m - 1.0)
    if not _guard(internal, cross_ac, cross_atoms):
        inf = math.inf
        return EntropyValue(inf, inf, 0.0, {"internal": internal, "cross": cross_ac + cross_atoms,
                                            "reference": reference})
    ac_part = internal + reference + cross_ac
    if atom_mass > 0 and m > 1:
        singular = math.inf
    else:
        singular = cross_atoms
    breakdown = {"internal": internal, "cross": cross_ac + cross_atoms, "reference": reference}
    return EntropyValue(ac_part + singular, ac_part, singular, breakdown)


def kl(mu: GridMeasure, nu: GridMeasure) -> float:
    vol = mu.domain.cell_volume
    r, s = mu.rho, nu.rho
    pos = r > 0
    if np.any(pos & (s <= 0)):
        return math.inf
    return float(np.sum(r[pos] * np.log(r[pos] / s[pos]) * vol[pos]))


def reference_from_density(p: MParam, nu: GridMeasure) -> ReferencePotential:
    """Reference potential with ``exp_m(-Psi) = rho_nu`` (requires rho_nu > 0)."""
    if np.any(nu.rho <= 0):
        raise ValueError("reference density must be positive")
    return ReferencePotential(nu.domain, p, -ln_m(p, nu.rho))


def kl_limit_check(mu: GridMeasure, nu: GridMeasure, eps: float = 1e-3) -> dict:
    """Compare H_m(mu|nu) at m = 1 -+ eps (and 2 eps) with KL(mu||nu)."""
    target = kl(mu, nu)
    vals = {}
    for e in (eps, 2 * eps):
        for m in (1 - e, 1 + e):
            p = MParam(m)
            vals[m] = h_m(p, mu, reference_from_density(p, nu)).value
    dev1 = max(abs(vals[1 - eps] - target), abs(vals[1 + eps] - target))
    dev2 = max(abs(vals[1 - 2 * eps] - target), abs(vals[1 + 2 * eps] - target))
    tol = 1e-2 * (1 + target)
    order = math.log(dev2 / dev1, 2) if dev1 > 1e-14 and dev2 > 1e-14 else float("nan")
    return {"kl": target, "h_m": {repr(k): v for k, v in sorted(vals.items())},
            "deviation": dev1, "tolerance": tol, "observed_order": order,
            "holds": dev1 < tol}


def _masked_gradient(g: np.ndarray, active: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """Central differences using only active neighbours (one-sided otherwise)."""
    M = g.size
    idx = np.arange(M)
    if periodic:
        ip, im = (idx + 1) % M, (idx - 1) % M
        has_p, has_m = active[ip], active[im]
    else:
        ip, im = np.minimum(idx + 1, M - 1), np.maximum(idx - 1, 0)
        has_p = active[ip] & (idx < M - 1)
        has_m = active[im] & (idx > 0)
    gp = np.where(has_p, g[ip], 0.0)
    gm = np.where(has_m, g[im], 0.0)
    out = np.zeros(M)
    both = has_p & has_m
    out[both] = (gp - gm)[both] / (2 * h)
    only_p = has_p & ~has_m
    out[only_p] = (gp - g)[only_p] / h
    only_m = has_m & ~has_p
    out[only_m] = (g - gm)[only_m] / h
    return np.where(active, out, 0.0)


def fisher_i_m(p: MParam, mu: GridMeasure, ref: ReferencePotential, rho_floor: float = RHO_FLOOR,
               diagnostics: bool = False):
    """``1/(m-1)^2 int |d(rho^(m-1) - sigma^(m-1))|^2 rho domega``.

    Gradients use nodes with ``rho > rho_floor`` only.  For m > 1, mass
    outside the support of sigma gives ``+inf``.
    """
    m = p.m
    d = mu.domain
    rho, sig = mu.rho, ref.sigma
    active = rho > rho_floor
    diag = {"rho_floor": rho_floor, "excluded_mass": float(np.sum(mu.cell_mass[~active]))}
    if m > 1 and np.any(active & (sig <= 0)):
        diag["reason"] = "support of mu exceeds support of sigma"
        return (math.inf, diag) if diagnostics else math.inf
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        g = np.where(active, rho ** (m - 1.0), 0.0) - np.where(sig > 0, sig ** (m - 1.0), 0.0)
    g = np.where(active, g, 0.0)
    dg = _masked_gradient(g, active, d.h, d.periodic)
    val = float(np.sum(dg**2 * rho * d.cell_volume)) / (m - 1.0) ** 2
    if not _guard(val):
        val = math.inf
    return (val, diag) if diagnostics else val


def lsc_check(seq, mu: GridMeasure, ref: ReferencePotential, J: int = 512,
              w2_tol: float = 5e-2, tail: int = 3, scales=None) -> dict:
    """Lower semicontinuity of H_m along a weakly convergent sequence.

    Convergence is verified through W2 of the quantile forms (atoms in
    ``mu`` are spread over one grid cell for this test only).

    A sequence that approaches the limit value from below (mollified atoms
    for m < 1 lose internal energy like ``eps^(1-m)``) cannot be certified
    by its finite tail.  If ``scales`` (the mollification widths) is given,
    the tail deficit ``H(mu) - H(seq_k)`` is fitted to ``C eps^gamma``; the
    check then holds when the deficits shrink and ``gamma > 0``, i.e. the
    extrapolated deficit at ``eps = 0`` is zero.
    """
    p = ref.p
    target = mu
    if mu.atoms:
        d = mu.domain
        rho = mu.rho.copy()
        for x, w in mu.atoms:
            i = min(int((x - d.a) / d.h), d.M - 1)
            rho[i] += w / d.cell_volume[i]
        target = GridMeasure(d, rho)
    qt = to_quantile(target, J)
    dists = [w2(to_quantile(s, J), qt) for s in seq]
    if not dists or dists[-1] > w2_tol:
        raise ValueError(f"sequence does not converge weakly (last W2 = {dists[-1] if dists else None})")
    values = [h_m(p, s, ref).value for s in seq]
    liminf = min(values[-tail:])
    limit = h_m(p, mu, ref).value
    out = {"limit_value": limit, "sequence_values": values, "liminf_estimate": liminf,
           "w2_to_limit": dists}
    if math.isfinite(limit):
        holds = limit <= liminf + 1e-6
        if not holds and scales is not None:
            eps = np.asarray(scales, dtype=float)[-tail:]
            deficit = limit - np.asarray(values[-tail:])
            if np.all(deficit > 0) and np.all(np.diff(deficit) < 0):
                gamma = float(np.polyfit(np.log(eps), np.log(deficit), 1)[0])
                out["deficit_exponent"] = gamma
                holds = gamma > 0
    else:
        # an infinite limit is only consistent with a sequence that blows up
        tail_vals = values[-tail:]
        holds = all(b > a for a, b in zip(tail_vals, tail_vals[1:])) or not math.isfinite(liminf)
    out["holds"] = bool(holds)
    return out
