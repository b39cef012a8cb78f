import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wassflow import Domain1D, GridMeasure, MParam, QuantileRep, m_gaussian, to_density, to_quantile
from wassflow.domain import support_radius_bound
from wassflow.measures import bump_mixture, from_lebesgue, m_gaussian_scale


def uniform(d):
    return GridMeasure(d, np.full(d.M, 1.0 / d.total_volume))


def test_invariants_enforced():
    d = Domain1D("segment", 0, 1, 10)
    with pytest.raises(ValueError):
        GridMeasure(d, np.full(10, 2.0))
    with pytest.raises(ValueError):
        GridMeasure(d, -np.ones(10))
    with pytest.raises(ValueError):
        GridMeasure(d, np.full(10, 0.9), atoms=[(2.0, 0.1)])
    mu = GridMeasure(d, np.full(10, 0.9), atoms=[(0.5, 0.1)])
    assert mu.total_mass == pytest.approx(1.0)


def test_quantile_uniform_examples():
    d = Domain1D("segment", 0, 1, 64)
    q = to_quantile(uniform(d), 4)
    assert np.allclose(q.X, [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(ValueError):
        to_quantile(GridMeasure(d, np.full(64, 0.9), atoms=[(0.5, 0.1)]), 4)


def test_quantile_narrow_bump():
    d = Domain1D("segment", -1, 1, 4000)
    mu = bump_mixture(d, [0.3], [1e-3], [1.0])
    q = to_quantile(mu, 16)
    assert np.max(np.abs(q.X - 0.3)) < 5e-3


def test_to_density_examples():
    d = Domain1D("segment", 0, 2, 40)
    s = (np.arange(100) + 0.5) / 100
    E = np.linspace(0, 1, 101)
    mu = to_density(QuantileRep(s, E), d)
    assert np.allclose(mu.lebesgue_density[:20], 1.0) and np.allclose(mu.rho[20:], 0.0)
    mu2 = to_density(QuantileRep(2 * s, 2 * E), d)
    assert np.allclose(mu2.rho, 0.5)
    assert abs(mu2.total_mass - 1.0) < 1e-12


@given(seed=st.integers(0, 10_000), J=st.sampled_from([64, 128, 256]))
def test_round_trip_l1(seed, J):
    rng = np.random.default_rng(seed)
    d = Domain1D("segment", -3, 3, 256)
    mu = bump_mixture(d, rng.uniform(-1.5, 1.5, 3), rng.uniform(0.3, 0.8, 3),
                      rng.uniform(0.2, 1.0, 3), floor=0.01)
    back = to_density(to_quantile(mu, J), d)
    # L1 of densities against a bound stated in units of length
    assert mu.l1(back) <= 2 * (d.h + 1.0 / J) * d.length
    assert back.mean == pytest.approx(mu.mean, abs=d.h + 1.0 / J)
    assert back.variance == pytest.approx(mu.variance, abs=2 * (d.h + 1.0 / J))


def test_m_gaussian_classical_proxy():
    d = Domain1D("segment", -8, 8, 2048)
    mu, ref = m_gaussian(MParam(0.999), 0.2, 0.7, d)
    gauss = np.exp(-(d.x - 0.2) ** 2 / 1.4) / math.sqrt(2 * math.pi * 0.7)
    assert np.max(np.abs(mu.lebesgue_density - gauss)) < 1e-2
    assert ref is not None and ref.mass == pytest.approx(1.0)


@pytest.mark.parametrize("m", [0.6, 0.75, 1.5, 2.0, 3.0])
def test_m_gaussian_moments(m):
    d = Domain1D("segment", -12, 12, 2400)
    mu, ref = m_gaussian(MParam(m), 0.4, 0.5, d, tail_tol=1e-3)
    assert abs(mu.mean - 0.4) <= d.h
    assert np.allclose(ref.sigma / ref.mass, mu.rho, atol=1e-10)
    if m < 1:
        # heavy tails: truncation loses a little variance
        assert mu.variance == pytest.approx(0.5, rel=0.05)
    else:
        assert mu.variance == pytest.approx(0.5, rel=1e-3)


@pytest.mark.parametrize("m", [0.5, 0.6, 0.75, 0.9, 1.2, 1.5, 2.0, 3.0])
def test_m_gaussian_scale_closed_form(m):
    # unit-variance Student-type (m<1) and compact Beta-type (m>1) profiles
    if m > 1:
        k = 1 / (m - 1)
        expected = 2 / ((m - 1) * (2 * k + 3))
    else:
        q = 1 / (1 - m)
        expected = 2 / ((1 - m) * (2 * q - 3))
    assert m_gaussian_scale(m) == pytest.approx(expected, rel=1e-10)


def test_m_gaussian_compact_support():
    d = Domain1D("segment", -3, 3, 600)
    mu, ref = m_gaussian(MParam(2.0), 0.0, 0.3, d)
    R = math.sqrt(2.0) * math.sqrt(0.3 / m_gaussian_scale(2.0))
    assert np.all(mu.rho[np.abs(d.x) > R + d.h] == 0.0)
    assert np.all(mu.rho[np.abs(d.x) < R - d.h] > 0.0)
    assert support_radius_bound(ref)["holds"]


def test_m_gaussian_errors():
    d = Domain1D("segment", -1, 1, 100)
    with pytest.raises(ValueError, match="radius"):
        m_gaussian(MParam(2.0), 0.0, 1.0, d)
    with pytest.raises(ValueError, match="radius"):
        m_gaussian(MParam(0.75), 0.0, 0.5, d)
    with pytest.raises(ValueError):
        m_gaussian(MParam(2.0), 0.0, -1.0, d)


def test_serialisation_is_stable():
    d = Domain1D("segment", 0, 1, 8)
    mu = GridMeasure(d, np.full(8, 0.9), atoms=[(0.5, 0.1)])
    assert mu.to_json() == mu.to_json()
    data = json.loads(mu.to_json())
    assert data["atoms"] == [[0.5, 0.1]] and len(data["rho"]) == 8
    assert mu.to_csv().splitlines()[0] == "x,rho"


def test_weighted_grid_mass():
    d = Domain1D("segment", 0, 2, 100, psi_src="x")
    mu = from_lebesgue(d, np.ones(d.M))
    assert mu.total_mass == pytest.approx(1.0)
    assert np.allclose(mu.lebesgue_density, 0.5)
