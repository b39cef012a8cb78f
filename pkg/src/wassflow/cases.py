"""Seeded random measures and test functions for the randomized checks."""
from __future__ import annotations

import numpy as np

from .domain import ReferencePotential
from .measures import GridMeasure, QuantileRep, to_quantile
from .mcalc import exp_m
from .flow.trace import reference_measure
from .flow.jko import _edges_of


def cos_series(x, a, b, rng, n_modes: int = 4, amp: float = 1.0) -> np.ndarray:
    """Random smooth function ``sum c_k cos(k pi (x-a)/(b-a))`` with ``max|c| <= amp``."""
    s = (np.asarray(x) - a) / (b - a)
    c = rng.uniform(-1.0, 1.0, n_modes) / np.arange(1, n_modes + 1)
    f = sum(ck * np.cos((k + 1) * np.pi * s) for k, ck in enumerate(c))
    return amp * f / max(float(np.max(np.abs(f))), 1e-300)


def translated_reference(ref: ReferencePotential, shift: float) -> np.ndarray:
    """Nodal ``sigma(x - shift)`` normalised to unit mass on the grid."""
    d = ref.domain
    m = ref.p.m
    Psi = np.asarray(ref.Psi_fn(d.x - shift), dtype=float)
    if m > 1:
        s = np.where(Psi < 1.0 / (m - 1.0), exp_m(m, -np.minimum(Psi, 1.0 / (m - 1.0))), 0.0)
    else:
        s = exp_m(m, -Psi)
    return s / float(np.sum(s * d.cell_volume))


def perturbed_measure(ref: ReferencePotential, rng, amp: float = 0.5,
                      max_shift: float = 0.3) -> GridMeasure:
    """Random absolutely continuous measure near nu.

    For m < 1 the density is a translate of sigma times ``1 + g``; for
    m > 1 it is ``sigma (1 + g)``, which stays inside the support of nu so
    that I_m is finite.  ``|g| <= amp < 1`` keeps the density positive.
    """
    d = ref.domain
    g = 1.0 + cos_series(d.x, d.a, d.b, rng, amp=rng.uniform(0.0, amp))
    if ref.p.m < 1:
        base = translated_reference(ref, rng.uniform(-max_shift, max_shift))
    else:
        base = ref.sigma
    rho = base * g
    return GridMeasure(d, rho / float(np.sum(rho * d.cell_volume)))


def _deform(Y, s, L, rng, wiggle):
    k = rng.integers(1, 4)
    return Y + wiggle * L * rng.uniform(-1, 1) * np.sin(np.pi * s) ** 2 * np.sin(np.pi * k * s)


def geodesic_pair(ref: ReferencePotential, rng, J: int, wiggle: float = 0.01):
    """Two endpoints for a convexity probe.

    Both are nu compressed by a common factor about its median, translated
    by well separated amounts and lightly deformed.  The geodesic between
    them is then close to a translation, along which the K-profile is
    nearly an equality, so the probe is sharp.
    """
    d = ref.domain
    L = d.b - d.a
    Y = _edges_of(to_quantile(reference_measure(ref), J), d.a, d.b)
    s = np.linspace(0.0, 1.0, J + 1)
    lam = rng.uniform(0.4, 0.7)
    mid = 0.5 * (d.a + d.b)
    Yc = mid + lam * (Y - mid)
    room = 0.5 * (1.0 - lam) * L * (1.0 - 2 * wiggle)
    c0 = rng.uniform(-1.0, -0.3) * room
    c1 = rng.uniform(0.3, 1.0) * room
    if rng.random() < 0.5:
        c0, c1 = c1, c0
    out = []
    for c in (c0, c1):
        Z = _deform(Yc + c, s, L, rng, wiggle)
        Z = np.clip(Z, d.a, d.b)
        if np.any(np.diff(Z) <= 0):
            raise ValueError("deformation too strong: quantile edges lost monotonicity")
        out.append(QuantileRep.from_edges(Z))
    return tuple(out)
