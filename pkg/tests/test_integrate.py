import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from laminate_orbits import model
from laminate_orbits.errors import DomainError, IntegrationError, ProjectionError, ResourceError
from laminate_orbits.integrate import EventSpec, IntegratorConfig, integrate, integrate_ode, project_to_level
from laminate_orbits.model import ParamSet

P01 = ParamSet(0.1, 0.0)
X_REF = np.array([0.1, 0.0, 0.3, 0.05])


def test_equilibrium_stays_put():
    tr = integrate(np.zeros(4), ParamSet(1e-3), (0.0, 5.0))
    assert np.all(tr.x == 0.0)


def test_layer_crossing_time():
    eps = 1e-3
    w0 = math.tanh(-5.0)
    x0 = [0.0, 0.0, w0, 0.5 * (1 - w0**2)]
    tr = integrate(x0, ParamSet(eps), (0.0, 0.05), events=[EventSpec("w=0", +1, terminal=True)])
    assert tr.terminated
    (rec,) = tr.events
    assert rec.t == pytest.approx(10 * eps, rel=1e-3)
    assert abs(rec.state[2]) <= 1e-11


def test_exponential_against_closed_form():
    tr = integrate_ode(lambda t, y: y, (0.0, 1.0), [1.0])
    assert tr.final[0] == pytest.approx(math.e, rel=1e-9)
    back = integrate_ode(lambda t, y: y, (1.0, 0.0), [math.e])
    assert back.final[0] == pytest.approx(1.0, rel=1e-9)


def test_dense_output_matches_closed_form():
    tr = integrate_ode(lambda t, y: np.array([y[1], -y[0]]), (0.0, 6.0), [0.0, 1.0])
    ts = np.linspace(0, 6, 97)
    np.testing.assert_allclose(tr(ts)[:, 0], np.sin(ts), atol=1e-8)


def test_fixed_step_order():
    ref = integrate(X_REF, P01, (0, 0.5), IntegratorConfig(rel_tol=1e-14, abs_tol=1e-16)).final
    errs = [np.linalg.norm(integrate(X_REF, P01, (0, 0.5), IntegratorConfig(fixed_step=h)).final - ref) for h in (0.02, 0.01, 0.005)]
    assert errs[0] / errs[1] >= 8.0
    assert errs[1] / errs[2] >= 8.0


def test_tolerance_sweep_decreases():
    ref = integrate(X_REF, P01, (0, 0.5), IntegratorConfig(rel_tol=1e-14, abs_tol=1e-16)).final
    errs = []
    for tol in (1e-6, 5e-7, 2.5e-7, 1.25e-7):
        cfg = IntegratorConfig(rel_tol=tol, abs_tol=tol * 1e-2)
        errs.append(np.linalg.norm(integrate(X_REF, P01, (0, 0.5), cfg).final - ref))
        assert errs[-1] <= 10 * tol
    assert all(a > b for a, b in zip(errs, errs[1:]))


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-0.05, 0.05),
    st.floats(-0.05, 0.05),
    st.floats(-0.3, 0.3),
    st.floats(-0.05, 0.05),
    st.floats(0.1, 2.0),
)
def test_forward_backward(u, v, w, z, T):
    x0 = np.array([u, v, w, z])
    if np.linalg.norm(x0) < 1e-3:
        return
    cfg = IntegratorConfig()
    a = integrate(x0, P01, (0, T), cfg).final
    b = integrate(a, P01, (T, 0), cfg).final
    assert np.linalg.norm(b - x0) <= 100 * cfg.rel_tol * np.linalg.norm(x0) + 1e-11


def test_projection_keeps_level():
    x0 = X_REF
    mu0 = model.hamiltonian(x0)
    tr = integrate(x0, P01, (0, 2.0), IntegratorConfig(rel_tol=1e-6, abs_tol=1e-8, projection=True))
    assert np.max(np.abs(model.hamiltonian(tr.x[1:]) - mu0)) <= 1e-14
    free = integrate(x0, P01, (0, 2.0), IntegratorConfig(rel_tol=1e-6, abs_tol=1e-8))
    assert np.max(np.abs(model.hamiltonian(free.x) - mu0)) > 1e-13


def test_project_to_level_examples():
    x = np.array([0.0, 0.0, 1.0, 0.0])
    assert np.array_equal(project_to_level(x, -1 / 8), x)
    y = project_to_level([0.0, 0.0, 1.0, 1e-6], -1 / 8)
    assert abs(model.hamiltonian(y) + 1 / 8) <= 1e-14
    assert np.linalg.norm(y - [0, 0, 1, 1e-6]) <= 10 * abs(model.hamiltonian([0, 0, 1, 1e-6]) + 1 / 8)
    with pytest.raises(ProjectionError):
        project_to_level(np.zeros(4), 0.1)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1.5, 1.5), st.floats(-1, 1), st.floats(-0.1, 0.1))
def test_projection_property(u, v, w, z, dmu):
    x = np.array([u, v, w, z])
    g = model.hamiltonian_gradient(x)
    if np.linalg.norm(g) < 0.1:
        return
    mu = float(model.hamiltonian(x)) + dmu * 1e-3
    y = project_to_level(x, mu)
    assert abs(model.hamiltonian(y) - mu) <= 1e-14 * max(1.0, np.max(np.abs(y)) ** 4)


def test_events_any_direction_and_callable():
    tr = integrate_ode(lambda t, y: np.array([y[1], -y[0]]), (0, 10), [0.0, 1.0], events=[EventSpec(lambda t, y: y[0], 0)])
    ts = [r.t for r in tr.events]
    np.testing.assert_allclose(ts, [math.pi, 2 * math.pi, 3 * math.pi], atol=1e-10)


def test_errors():
    with pytest.raises(DomainError):
        integrate(np.zeros(4), ParamSet(0.0), (0, 1))
    with pytest.raises(ResourceError):
        integrate(X_REF, P01, (0, 1), IntegratorConfig(max_steps=3))
    with pytest.raises(IntegrationError) as info:
        # finite-time blow-up of y' = y^2
        integrate_ode(lambda t, y: y**2, (0, 2), [1.0])
    assert info.value.t is not None and info.value.t < 1.0 + 1e-6
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
