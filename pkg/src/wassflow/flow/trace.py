"""Trajectory container shared by the JKO and PDE drivers."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from ..domain import ReferencePotential
from ..entropy import fisher_i_m, h_m
from ..measures import GridMeasure, to_quantile
from ..transport import w2_edges

TRACE_COLUMNS = ("k", "t", "H_m", "I_m", "W2_to_ref", "mass", "mean", "variance")
W2_J = 512


def reference_measure(ref: ReferencePotential) -> GridMeasure:
    """Normalised nu as a grid measure."""
    d = ref.domain
    return GridMeasure(d, ref.sigma / ref.mass)


def w2_to_reference(mu: GridMeasure, ref: ReferencePotential, J: int = W2_J,
                    _cache: dict = {}) -> float:
    key = id(ref)
    hit = _cache.get(key)
    if hit is None or hit[0] is not ref or hit[1].J != J:
        _cache.clear()
        hit = (ref, to_quantile(reference_measure(ref), J))
        _cache[key] = hit
    return w2_edges(to_quantile(mu, J), hit[1])


@dataclass
class FlowTrace:
    """Append-only record of a trajectory.

    ``H`` holds the energy the scheme itself minimises or dissipates (the
    quantile-coordinate functional for JKO, the grid functional for the
    PDE).  ``step_w2`` has one entry fewer than ``times``.
    """

    times: list = field(default_factory=list)
    measures: list = field(default_factory=list)
    H: list = field(default_factory=list)
    I: list = field(default_factory=list)
    W2_to_ref: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    step_w2: list = field(default_factory=list)
    quantiles: list = field(default_factory=list)
    label: str = ""

    def append(self, t, mu: GridMeasure, ref: ReferencePotential, H=None, q=None,
               with_I: bool = True):
        p = ref.p
        self.times.append(float(t))
        self.measures.append(mu)
        self.H.append(float(h_m(p, mu, ref).value if H is None else H))
        self.I.append(float(fisher_i_m(p, mu, ref)) if with_I else math.nan)
        self.W2_to_ref.append(w2_to_reference(mu, ref))
        self.mass.append(mu.total_mass)
        if q is not None:
            self.quantiles.append(q)

    def __len__(self):
        return len(self.times)

    def check_invariants(self, energy_tol: float = 1e-10, mass_tol: float = 1e-8) -> list:
        """Return a list of violated invariants (empty when all hold)."""
        bad = []
        H = np.asarray(self.H)
        rise = np.diff(H) - energy_tol * (1 + np.abs(H[:-1]))
        if np.any(rise > 0):
            k = int(np.argmax(rise))
            bad.append(f"energy increased at step {k}: {H[k]!r} -> {H[k + 1]!r}")
        m = np.asarray(self.mass)
        if np.any(np.abs(m - 1) > mass_tol):
            bad.append(f"mass drift {float(np.max(np.abs(m - 1)))!r}")
        return bad

    def to_csv(self) -> str:
        rows = [",".join(TRACE_COLUMNS)]
        for k, (t, mu) in enumerate(zip(self.times, self.measures)):
            vals = (k, t, self.H[k], self.I[k], self.W2_to_ref[k], self.mass[k],
                    mu.mean, mu.variance)
            rows.append(",".join(str(v) if isinstance(v, int) else repr(float(v)) for v in vals))
        return "\n".join(rows) + "\n"
