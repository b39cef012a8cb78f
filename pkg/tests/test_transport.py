import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wassflow import Domain1D, GridMeasure, QuantileRep, displacement, to_quantile, w2, w2_lp_oracle
from wassflow.transport import optimal_coupling, w2_atoms, w2_circle, w2_edges


def uq(J, a=0.0, b=1.0):
    s = (np.arange(J) + 0.5) / J
    return QuantileRep(a + (b - a) * s, a + (b - a) * np.linspace(0, 1, J + 1))


def test_w2_examples():
    J = 1000
    assert w2(uq(J), uq(J)) == 0.0
    assert w2(uq(J), uq(J, 0.3, 1.3)) == pytest.approx(0.3, abs=1 / J)
    assert w2(uq(J), uq(J, 0, 2)) == pytest.approx(1 / math.sqrt(3), abs=2 / J)
    assert w2_edges(uq(J), uq(J, 0, 2)) == pytest.approx(1 / math.sqrt(3), abs=1e-12)
    with pytest.raises(ValueError):
        w2(uq(4), uq(5))


def test_lp_oracle_examples():
    assert w2_lp_oracle(([0.2], [1.0]), ([1.7], [1.0])) == pytest.approx(1.5)
    # equal-mass two-atom measures: enumerate both matchings by hand
    x, y = [0.0, 1.0], [0.5, 3.0]
    best = min((0.5**2 + 2**2) / 2, (3**2 + 0.5**2) / 2)
    assert w2_lp_oracle((x, [0.5, 0.5]), (y, [0.5, 0.5])) == pytest.approx(math.sqrt(best))
    J = 8
    s = (np.arange(J) + 0.5) / J
    got = w2(QuantileRep(s), QuantileRep(2 * s))
    oracle = w2_lp_oracle((s, np.full(J, 1 / J)), (2 * s, np.full(J, 1 / J)))
    assert abs(got - oracle) <= 1e-6 * oracle
    with pytest.raises(ValueError):
        w2_lp_oracle((np.arange(13.0), np.full(13, 1 / 13)), ([0.0], [1.0]))


@given(seed=st.integers(0, 100_000))
def test_monotone_coupling_matches_lp(seed):
    rng = np.random.default_rng(seed)
    n, k = rng.integers(1, 9, 2)
    mu = (rng.normal(size=n), rng.dirichlet(np.ones(n)))
    nu = (rng.normal(size=k), rng.dirichlet(np.ones(k)))
    c = optimal_coupling(mu, nu)
    assert c.is_monotone
    (xs, wx), (ys, wy) = c.marginals()
    order = np.argsort(mu[0])
    assert np.allclose(np.sort(mu[0]), xs) and np.allclose(wx, mu[1][order], atol=1e-9)
    oracle = w2_lp_oracle(mu, nu)
    assert w2_atoms(mu, nu) == pytest.approx(oracle, rel=1e-6, abs=1e-9)


def test_local_exchange_never_helps(rng):
    for _ in range(50):
        n = 6
        x, y = np.sort(rng.normal(size=n)), np.sort(rng.normal(size=n))
        base = np.sum((x - y) ** 2)
        for i in range(n):
            for j in range(i + 1, n):
                yy = y.copy()
                yy[[i, j]] = yy[[j, i]]
                assert np.sum((x - yy) ** 2) >= base - 1e-12


def test_displacement(rng):
    a, b = uq(200), uq(200, 1.0, 3.0)
    assert displacement(a, b, 0.0) is a and displacement(a, b, 1.0) is b
    mid = displacement(uq(200), uq(200, 1.0, 2.0), 0.5)
    assert np.allclose(mid.X, uq(200, 0.5, 1.5).X)
    D = w2(a, b)
    worst = 0.0
    for s, t in rng.uniform(0, 1, (100, 2)):
        got = w2(displacement(a, b, s), displacement(a, b, t))
        worst = max(worst, abs(got - abs(s - t) * D))
    assert worst < 1e-10
    with pytest.raises(ValueError):
        displacement(a, b, 1.5)


def test_triangle_inequality(rng):
    d = Domain1D("segment", -4, 4, 200)
    worst = np.inf
    for _ in range(1000):
        qs = []
        for _ in range(3):
            c = rng.uniform(-2, 2)
            s = rng.uniform(0.2, 1.0)
            rho = np.exp(-0.5 * ((d.x - c) / s) ** 2) + 1e-3
            qs.append(to_quantile(GridMeasure(d, rho / (rho.sum() * d.h)), 64))
        a, b, c = qs
        worst = min(worst, w2(a, b) + w2(b, c) - w2(a, c))
    assert worst >= -1e-10


def test_circle_distance():
    L = 1.0
    J = 64
    s = (np.arange(J) + 0.5) / J * 0.2
    a, b = QuantileRep(s), QuantileRep(s + 0.9)  # shorter way round is 0.1
    assert w2_circle(a, b, L) == pytest.approx(0.1, abs=1e-12)
    assert w2_circle(a, a, L) == 0.0
