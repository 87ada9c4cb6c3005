import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from scipy import integrate as sint

from laminate_orbits import model
from laminate_orbits.errors import ChartError, DomainError
from laminate_orbits.model import ParamSet

coord = st.floats(-3.0, 3.0, allow_nan=False)
states = st.tuples(coord, coord, coord, coord).map(np.array)
eps_values = st.floats(1e-4, 1.0)


def test_slow_field_examples():
    assert np.array_equal(model.vector_field_slow(np.zeros(4), ParamSet(1.0)), np.zeros(4))
    np.testing.assert_allclose(model.vector_field_slow([0, 0, 1, 0], ParamSet(0.5)), [1, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(model.vector_field_slow([1, 0, -1, 0.1], ParamSet(0.1)), [-1, 1, 1, 0], atol=1e-14)


def test_slow_field_rejects_zero_eps():
    with pytest.raises(DomainError):
        model.vector_field_slow(np.zeros(4), ParamSet(0.0))


def test_fast_field_examples():
    np.testing.assert_allclose(model.vector_field_fast([0, 0, 0.3, 0.2], ParamSet(0.0)), [0, 0, 0.2, 0.5 * (0.027 - 0.3)])
    np.testing.assert_allclose(model.vector_field_fast([1, 1, 1, 1], ParamSet(0.001)), [0.001, 0.001, 1, -1])


@given(states, eps_values)
def test_fast_is_eps_times_slow(x, eps):
    p = ParamSet(eps)
    np.testing.assert_allclose(model.vector_field_fast(x, p), eps * model.vector_field_slow(x, p), rtol=1e-12, atol=1e-12)


def test_hamiltonian_values():
    assert model.hamiltonian(np.zeros(4)) == 0.0
    assert model.hamiltonian([0, 0, 1, 0]) == pytest.approx(-1 / 8, abs=1e-15)
    s3 = math.sqrt(3.0)
    assert model.hamiltonian([0, -1 / (3 * s3), 1 / s3, 0]) == pytest.approx(1 / 24, abs=1e-15)


def test_gradient_examples():
    np.testing.assert_allclose(model.hamiltonian_gradient([1, 0, 0, 0]), [1, 0, 0, 0])
    np.testing.assert_allclose(model.hamiltonian_gradient([0, 0, 1, 0]), [0, -1, 0, 0], atol=1e-15)


@given(states)
def test_gradient_matches_finite_differences(x):
    g = model.hamiltonian_gradient(x)
    fd = np.empty(4)
    for k in range(4):
        d = 1e-6 * (1 + abs(x[k]))
        e = np.zeros(4)
        e[k] = d
        fd[k] = (model.hamiltonian(x + e) - model.hamiltonian(x - e)) / (2 * d)
    np.testing.assert_allclose(fd, g, rtol=1e-6, atol=1e-6 * (1 + np.max(np.abs(g))))


@given(states)
def test_hessian_matches_gradient_differences(x):
    Hs = model.hamiltonian_hessian(x)
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1e-6
        col = (model.hamiltonian_gradient(x + e) - model.hamiltonian_gradient(x - e)) / 2e-6
        np.testing.assert_allclose(Hs[:, k], col, atol=1e-6 * (1 + np.max(np.abs(Hs))))


@given(states, eps_values)
def test_first_integral(x, eps):
    p = ParamSet(eps)
    f = model.vector_field_slow(x, p)
    g = model.hamiltonian_gradient(x)
    scale = 1 + np.linalg.norm(f) * np.linalg.norm(g)
    assert abs(g @ f) <= 1e-12 * scale


@given(states, eps_values)
def test_symmetries(x, eps):
    p = ParamSet(eps)
    f = model.vector_field_slow
    assert np.array_equal(f(-x, p), -f(x, p))
    sig = model.reflect_r
    assert np.array_equal(f(sig(x), p), -sig(f(x, p)))
    sig2 = model.reflect_r2
    assert np.array_equal(f(sig2(x), p), -sig2(f(x, p)))


def test_critical_manifold_and_folds():
    assert model.critical_manifold_v(0.0) == 0.0
    assert model.critical_manifold_v(1.0) == 0.0
    assert model.critical_manifold_v(1 / math.sqrt(3)) == pytest.approx(-1 / (3 * math.sqrt(3)), abs=1e-15)
    lo, hi = model.fold_lines()
    assert lo == pytest.approx(-0.5773502691896258, abs=1e-15)
    assert hi == -lo
    assert model.classify_branch(0.5) is model.CriticalBranch.MIDDLE
    assert model.classify_branch(-1.0) is model.CriticalBranch.LEFT
    assert model.classify_branch(0.9) is model.CriticalBranch.RIGHT


def test_layer_equilibria_examples():
    roots = model.layer_equilibria(0.0)
    np.testing.assert_allclose([r for r, _ in roots], [-1, 0, 1], atol=1e-15)
    roots = model.layer_equilibria(1 / (3 * math.sqrt(3)))
    assert len(roots) == 2
    (r0, m0), (r1, m1) = roots
    assert (m0, m1) == (2, 1)
    assert r0 == pytest.approx(-1 / math.sqrt(3), abs=1e-12)
    assert r1 == pytest.approx(2 / math.sqrt(3), abs=1e-12)
    (r,) = model.layer_equilibria(1.0)
    assert r[0] == pytest.approx(1.5213797068, abs=1e-9)


@given(st.floats(-2.0, 2.0))
def test_layer_equilibria_residual_and_count(vb):
    roots = model.layer_equilibria(vb)
    for r, _ in roots:
        assert abs(r**3 - r - 2 * vb) <= 1e-12 * max(1.0, abs(r) ** 3)
    vf = 1 / (3 * math.sqrt(3))
    if abs(vb) < vf - 1e-9:
        assert len(roots) == 3
    elif abs(vb) > vf + 1e-9:
        assert len(roots) == 1
    ws = [r for r, _ in roots]
    assert ws == sorted(ws)


def test_heteroclinic_profile():
    w, z = model.heteroclinic_profile(0.0, "up")
    assert (w, z) == (0.0, 0.5)
    w, z = model.heteroclinic_profile(60.0, "up")
    assert w == pytest.approx(1.0) and z == pytest.approx(0.0, abs=1e-12)
    assert model.layer_hamiltonian(0.0, 0.5) == pytest.approx(-1 / 8, abs=1e-15)
    with pytest.raises(ValueError):
        model.heteroclinic_profile(0.0, "sideways")


@pytest.mark.parametrize("direction", ["up", "down"])
def test_heteroclinic_solves_layer_ode(direction):
    xi = np.linspace(-20, 20, 1000)
    w, z = model.heteroclinic_profile(xi, direction)
    # w' = z and z' = (w^3 - w)/2 checked analytically via w' = +-(1 - w^2)/2
    sgn = 1.0 if direction == "up" else -1.0
    dw = sgn * 0.5 * (1 - w**2)
    dz = -sgn * w * dw
    assert np.max(np.abs(dw - z)) <= 1e-12
    assert np.max(np.abs(dz - 0.5 * (w**3 - w))) <= 1e-12
    assert np.max(np.abs(model.layer_hamiltonian(w, z) + 1 / 8)) <= 1e-12


def test_jump_points():
    assert model.jump_points(0.0) == (0.5, -0.5)
    assert model.hamiltonian([0.5, 0, 1, 0]) == pytest.approx(0.0, abs=1e-15)
    assert model.jump_points(-1 / 8) == (0.0, -0.0)
    up, _ = model.jump_points(1 / 24)
    assert up == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    with pytest.raises(DomainError):
        model.jump_points(-0.2)


def test_reduced_flow():
    np.testing.assert_allclose(model.reduced_flow_desing(0.0, 1.0), (2.0, 0.0))
    np.testing.assert_allclose(model.reduced_flow_desing(0.0, 1 / math.sqrt(3)), (0.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(model.reduced_flow_desing(1.0, -1.0), (-2.0, 2.0))


def test_singular_period_at_zero():
    expected = 2 * (2 - math.sqrt(2) * math.atan(1 / math.sqrt(2)))
    assert model.singular_period(0.0) == pytest.approx(expected, abs=1e-12)
    assert model.slow_arc_wmin(0.0) == pytest.approx(math.sqrt(2 / 3), abs=1e-15)


def test_singular_period_plain_quadrature():
    # independent: the raw integral with its inverse-square-root endpoint
    mu = 0.01
    wmin = model.slow_arc_wmin(mu)
    f = lambda w: (3 * w * w - 1) / (2 * math.sqrt(max(2 * mu + (3 * w**4 - 2 * w**2) / 4, 0.0)))  # noqa: E731
    val, _ = sint.quad(f, wmin, 1.0, limit=400, epsabs=1e-13)
    assert model.singular_period(mu) == pytest.approx(4 * val, rel=1e-8)


def test_singular_period_monotone():
    grid = np.linspace(model.MU_MIN, model.MU_MAX, 52)[1:-1]
    T = [model.singular_period(m) for m in grid]
    assert np.all(np.diff(T) > 0)
    assert model.singular_period(-0.125 + 1e-12) < 1e-2


def test_singular_orbit_invariants():
    orb = model.singular_orbit(0.01)
    assert orb.u_jump == model.jump_points(0.01)[0]
    for arc in (orb.slow_arc_left, orb.slow_arc_right):
        assert np.max(np.abs(model.hamiltonian(arc) - 0.01)) <= 1e-12
        assert np.max(np.abs(arc[:, 1] - model.critical_manifold_v(arc[:, 2]))) <= 1e-12
    assert np.all(orb.slow_arc_right[:, 2] > 1 / math.sqrt(3))
    assert np.all(orb.slow_arc_left[:, 2] < -1 / math.sqrt(3))
    for jump in (orb.jump_up, orb.jump_down):
        assert np.max(np.abs(model.layer_hamiltonian(jump[:, 2], jump[:, 3]) + 1 / 8)) <= 1e-12
    d = orb.to_dict()
    assert d["T0"] == orb.T0


@pytest.mark.parametrize("mu", [-0.125, 1 / 24, 0.1])
def test_singular_orbit_domain(mu):
    with pytest.raises(DomainError):
        model.singular_orbit(mu)


def test_chart_examples():
    p = ParamSet(1e-3, -1 / 8)
    x = model.chart_to_full([0, 1, 0], -1 / 8, "v-chart")
    np.testing.assert_allclose(x, [0, 0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(model.reduced3_vector_field([0, 1, 0], p), [1, 0, 0], atol=1e-12)
    x = model.chart_to_full([0, 1, 0], -1 / 8, "u-plus-chart")
    np.testing.assert_allclose(x, [0, 0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(model.reduced3_vector_field([0, 1, 0], p, "u-plus-chart"), [0, 0, 0], atol=1e-15)
    with pytest.raises(ChartError):
        model.reduced3_vector_field([0, 0.1, 0], p)
    with pytest.raises(ChartError):
        model.reduced3_vector_field([-1.0, 1.0, 0.0], ParamSet(1e-3, 0.0), "u-plus-chart")


@settings(max_examples=200)
@given(
    st.floats(-0.12, 0.04),
    st.floats(-1, 1),
    st.floats(0.2, 1.5),
    st.floats(-0.5, 0.5),
    st.sampled_from([1.0, -1.0]),
    st.floats(1e-3, 0.1),
)
def test_v_chart_pushforward(mu, u, w, z, side, eps):
    w = side * w
    p = ParamSet(eps, mu)
    x = model.chart_to_full([u, w, z], mu, "v-chart")
    assert abs(model.hamiltonian(x) - mu) <= 1e-12 * (1 + np.max(np.abs(x)) ** 4)
    f = model.vector_field_slow(x, p)
    r = model.reduced3_vector_field([u, w, z], p)
    scale = 1 + np.max(np.abs(f))
    np.testing.assert_allclose(r, f[[0, 2, 3]], atol=1e-10 * scale)


@settings(max_examples=200)
@given(st.floats(-0.12, 0.04), st.floats(-0.3, 0.3), st.floats(-1.2, 1.2), st.floats(-0.5, 0.5), st.floats(1e-3, 0.1))
def test_u_chart_pushforward(mu, v, w, z, eps):
    rad = model.chart_u_radicand(v, w, z, mu)
    if rad <= 1e-6:
        return
    p = ParamSet(eps, mu)
    for chart in ("u-plus-chart", "u-minus-chart"):
        x = model.chart_to_full([v, w, z], mu, chart)
        assert abs(model.hamiltonian(x) - mu) <= 1e-12
        f = model.vector_field_fast(x, p)
        r = model.reduced3_vector_field([v, w, z], p, chart)
        np.testing.assert_allclose(r, f[[1, 2, 3]], atol=1e-10 * (1 + np.max(np.abs(f))))
