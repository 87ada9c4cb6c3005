import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from scipy import integrate as quad_integrate

from laminate_orbits import bvp, model
from laminate_orbits.continuation import OrbitProfile, solve_periodic
from laminate_orbits.energy import (
    energy_minimum,
    functional_density,
    jump_energy_constant,
    mu_for_singular_period,
    mueller_period,
    scaling_fit,
    scan_samples,
    well_potential,
)
from laminate_orbits.errors import DomainError

from test_continuation import small_orbit


@pytest.fixture(scope="module")
def small():
    return small_orbit(N=40)


def _rolled(prof, k):
    sol = prof.sol
    y = np.concatenate([np.roll(sol.y[:-1], -k, axis=0), np.roll(sol.y[:-1], -k, axis=0)[:1]])
    return OrbitProfile(bvp.BvpSolution(sol.mesh, y, np.roll(sol.Y, -k, axis=0), sol.p.copy()), prof.params)


def test_zero_profile_density():
    sol = bvp.BvpSolution.from_function(bvp.Mesh.uniform(20), lambda t: np.zeros((len(t), 4)), [0.7, 0.0])
    assert functional_density(OrbitProfile(sol, model.ParamSet(1e-3))) == pytest.approx(0.25, abs=1e-15)


def test_jump_energy_constant():
    assert jump_energy_constant() == pytest.approx(4 / 3, abs=1e-12)


def test_jump_energy_on_profile():
    # z^2 + W(w) along the layer heteroclinic, integrated on the fast scale
    def dens(xi):
        w, z = model.heteroclinic_profile(xi)
        return z * z + well_potential(w)

    val, _ = quad_integrate.quad(dens, -60, 60, epsabs=1e-13, limit=200)
    assert val == pytest.approx(jump_energy_constant(), abs=1e-10)


def test_mueller_period_examples():
    assert mueller_period(1e-3) == pytest.approx(0.4, rel=1e-12)
    assert mueller_period(1e-6) == pytest.approx(0.04, rel=1e-12)
    with pytest.raises(DomainError):
        mueller_period(0.0)


def test_density_is_positive_and_symmetric(small):
    I = functional_density(small)
    # small orbits near the origin sit slightly below W(0) = 1/4
    assert 0.0 < I < 0.25
    flipped = OrbitProfile(bvp.BvpSolution(small.mesh, -small.sol.y, -small.sol.Y, small.sol.p), small.params)
    assert abs(functional_density(flipped) - I) <= 1e-12
    for k in (1, 7, 20):
        assert abs(functional_density(_rolled(small, k)) - I) <= 1e-12


def test_quadrature_converges(small):
    fine = solve_periodic(small.remesh(bvp.Mesh.uniform(80)))
    assert abs(functional_density(fine) - functional_density(small)) < 1e-8


def test_scan_interior_minimum():
    P = np.linspace(0.2, 0.6, 9)
    I = (P - 0.37) ** 2 + 1.0
    scan = scan_samples(1e-3, P[::-1], I[::-1])
    assert not scan.boundary
    assert scan.P_min == pytest.approx(0.37, abs=1e-12)
    assert scan.bracket[0] <= scan.P_min <= scan.bracket[1]
    assert [r[0] for r in scan.rows] == sorted(P)


def test_scan_monotone_is_boundary():
    P = np.linspace(0.2, 0.6, 9)
    scan = scan_samples(1e-3, P, 2.0 - P)
    assert scan.boundary
    assert scan.P_min == pytest.approx(0.6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 5.0), min_size=3, max_size=20, unique=True), st.floats(-1, 1))
def test_scan_vertex_is_bracketed(P, shift):
    P = np.array(P)
    I = np.cos(3 * P + shift)
    scan = scan_samples(1e-3, P, I)
    if not scan.boundary:
        assert scan.bracket[0] <= scan.P_min <= scan.bracket[1]
        assert scan.I_min <= min(I) + 1e-12


def test_scaling_fit_synthetic():
    eps = np.geomspace(1e-6, 1e-3, 7)
    alpha, C, res = scaling_fit(np.c_[eps, 4 * eps ** (1 / 3)])
    assert alpha == pytest.approx(1 / 3, abs=1e-12)
    assert C == pytest.approx(4.0, rel=1e-12)
    assert res <= 1e-12
    assert scaling_fit(np.c_[eps, eps])[0] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        scaling_fit([[1e-3, 1.0], [1e-4, 0.0], [1e-5, 1.0], [1e-6, 1.0]])
    with pytest.raises(ValueError):
        scaling_fit([[1e-3, 1.0]] * 3)


def test_mu_for_singular_period_inverts():
    for mu in (-0.12, -0.05, 0.0, 0.03):
        assert mu_for_singular_period(model.singular_period(mu)) == pytest.approx(mu, abs=1e-10)


@pytest.mark.slow
def test_energy_minimum_at_seed_eps(seed_orbit):
    scan = energy_minimum(seed_orbit, n_samples=11)
    assert not scan.boundary
    P = np.array([r[0] for r in scan.rows])
    I = np.array([r[1] for r in scan.rows])
    # convex near the minimum: positive second differences on the 5 nearest samples
    k = int(np.argmin(I))
    lo = max(0, min(k - 2, len(P) - 5))
    Pw, Iw = P[lo : lo + 5], I[lo : lo + 5]
    slopes = np.diff(Iw) / np.diff(Pw)
    assert np.all(np.diff(slopes) > 0)
    assert scan.P_min == pytest.approx(mueller_period(1e-3), rel=0.1)
