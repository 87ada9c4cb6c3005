"""Fast-slow Hamiltonian Euler-Lagrange system and its singular-limit geometry.

The energy density ``eps^2 u_XX^2 + W(u_X) + u^2`` with the double well
``W(s) = (s^2 - 1)^2 / 4`` has Euler-Lagrange equation
``eps^2 u'''' - (W'(u'))'/2 + u = 0``.  With ``w = u_X``, ``z = eps w_X`` and
``v = -eps^2 w_XX + W'(w)/2`` it becomes the first order system

    u' = w,   v' = u,   eps w' = z,   eps z' = (w^3 - w)/2 - v,

a (2,2) fast-slow system with first integral

    H(u, v, w, z) = (4u^2 - 8vw - 2w^2 + w^4 - 4z^2) / 8.

States are numpy arrays whose last axis holds ``(u, v, w, z)``; every vector
field here is vectorized over leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .errors import ChartError, DomainError

MU_MIN = -1.0 / 8.0
MU_MAX = 1.0 / 24.0
W_FOLD = 1.0 / math.sqrt(3.0)
V_FOLD = 1.0 / (3.0 * math.sqrt(3.0))
HETEROCLINIC_LEVEL = -1.0 / 8.0
V_CHART_MIN_W = 0.2

U, V, W, Z = range(4)


def as_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise ValueError(f"state must have trailing dimension 4, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class ParamSet:
    epsilon: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.epsilon >= 0.0) or not math.isfinite(self.epsilon):
            raise DomainError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu}")


class CriticalBranch(str, Enum):
    LEFT = "left"
    MIDDLE = "middle"
    RIGHT = "right"

    @classmethod
    def of(cls, w: float) -> "CriticalBranch":
        if w < -W_FOLD:
            return cls.LEFT
        if w > W_FOLD:
            return cls.RIGHT
        return cls.MIDDLE


# ---------------------------------------------------------------------------
# vector fields and the first integral


def _slow_part(x):
    u, v, w, z = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    # w*(w*w - 1) is exactly odd in w, so the symmetries hold bit for bit
    return u, v, w, z, 0.5 * w * (w * w - 1.0) - v


def vector_field_slow(x, p: ParamSet) -> np.ndarray:
    """Right-hand side on the slow scale X; undefined at ``epsilon = 0``."""
    if p.epsilon <= 0.0:
        raise DomainError("vector_field_slow needs epsilon > 0; use the layer or reduced problem")
    x = as_state(x)
    u, v, w, z, g = _slow_part(x)
    return np.stack([w, u, z / p.epsilon, g / p.epsilon], axis=-1)


def vector_field_fast(x, p: ParamSet) -> np.ndarray:
    """Right-hand side on the fast scale ``xi = X / epsilon`` (epsilon = 0 allowed)."""
    x = as_state(x)
    u, v, w, z, g = _slow_part(x)
    eps = p.epsilon
    return np.stack([eps * w, eps * u, z, g], axis=-1)


def jacobian_slow(x, epsilon: float) -> np.ndarray:
    """d(vector_field_slow)/dx, shape ``x.shape + (4,)``."""
    x = as_state(x)
    w = x[..., 2]
    J = np.zeros(x.shape + (4,))
    J[..., 0, 2] = 1.0
    J[..., 1, 0] = 1.0
    J[..., 2, 3] = 1.0 / epsilon
    J[..., 3, 1] = -1.0 / epsilon
    J[..., 3, 2] = (1.5 * w**2 - 0.5) / epsilon
    return J


def hamiltonian(x) -> np.ndarray | float:
    x = as_state(x)
    u, v, w, z = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return (4 * u**2 - 8 * v * w - 2 * w**2 + w**4 - 4 * z**2) / 8.0


def hamiltonian_gradient(x) -> np.ndarray:
    x = as_state(x)
    u, v, w, z = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return np.stack([u, -w, -v - 0.5 * w + 0.5 * w**3, -z], axis=-1)


def hamiltonian_hessian(x) -> np.ndarray:
    x = as_state(x)
    w = x[..., 2]
    Hx = np.zeros(x.shape + (4,))
    Hx[..., 0, 0] = 1.0
    Hx[..., 1, 2] = -1.0
    Hx[..., 2, 1] = -1.0
    Hx[..., 2, 2] = -0.5 + 1.5 * w**2
    Hx[..., 3, 3] = -1.0
    return Hx


# symmetries: S1 x -> -x is an equivariance; R and R2 are reversors
def reflect_s1(x):
    return -as_state(x)


def reflect_r(x):
    """Reversor with fixed set {u = 0, z = 0}."""
    return as_state(x) * np.array([-1.0, 1.0, 1.0, -1.0])


def reflect_r2(x):
    """Reversor with fixed set {v = 0, w = 0}."""
    return as_state(x) * np.array([1.0, -1.0, -1.0, 1.0])


# ---------------------------------------------------------------------------
# critical manifold, layer and reduced problems


def critical_manifold_v(w):
    w = np.asarray(w, dtype=float)
    return 0.5 * (w**3 - w)


def fold_lines() -> tuple[float, float]:
    return (-W_FOLD, W_FOLD)


def classify_branch(w: float) -> CriticalBranch:
    return CriticalBranch.of(w)


def layer_hamiltonian(w, z, v_bar: float = 0.0):
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    return -0.5 * z**2 + w**4 / 8.0 - w**2 / 4.0 - v_bar * w


def layer_equilibria(v_bar: float) -> list[tuple[float, int]]:
    """Real roots of ``w^3 - w - 2 v_bar = 0`` as ``(root, multiplicity)``, ascending."""
    v_bar = float(v_bar)
    s = 3.0 * math.sqrt(3.0) * v_bar
    c = 2.0 / math.sqrt(3.0)
    if abs(abs(s) - 1.0) <= 1e-12:
        sign = math.copysign(1.0, s)
        double, simple = -sign * W_FOLD, 2.0 * sign * W_FOLD
        roots = [(double, 2), (simple, 1)]
        return sorted(roots)
    if abs(s) < 1.0:
        phi = math.acos(s) / 3.0
        raw = [c * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        raw = [math.copysign(c * math.cosh(math.acosh(abs(s)) / 3.0), s)]
    polished = []
    for r in raw:
        d = 3.0 * r * r - 1.0
        if d != 0.0:
            r = r - (r**3 - r - 2.0 * v_bar) / d
        polished.append((r, 1))
    return sorted(polished)


def heteroclinic_profile(xi, direction: str = "up"):
    """Closed-form layer heteroclinic at ``v_bar = 0``; returns ``(w, z)``."""
    xi = np.asarray(xi, dtype=float)
    if direction == "up":
        w = np.tanh(0.5 * xi)
        return w, 0.5 * (1.0 - w**2)
    if direction == "down":
        w = -np.tanh(0.5 * xi)
        return w, -0.5 * (1.0 - w**2)
    raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")


def jump_points(mu: float) -> tuple[float, float]:
    """u-values ``(+r, -r)`` of the take-off/touch-down points at level mu."""
    r2 = 2.0 * mu + 0.25
    if r2 < 0.0:
        raise DomainError(f"no transition points for mu={mu} < -1/8")
    r = math.sqrt(r2)
    return r, -r


def reduced_flow_desing(u, w):
    """Reduced flow on C0 in (u, w) after multiplying time by (3w^2 - 1)."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    return (3.0 * w**2 - 1.0) * w, 2.0 * u


def reduced_flow(u, w):
    """Reduced flow on C0 in (u, w) in the original slow time (singular on the folds)."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    return w, 2.0 * u / (3.0 * w**2 - 1.0)


# ---------------------------------------------------------------------------
# singular periodic orbits


def _slow_arc_radicand(w, mu):
    return 2.0 * mu + (3.0 * w**4 - 2.0 * w**2) / 4.0


def slow_arc_wmin(mu: float) -> float:
    """Turning point of the right slow arc: the root of u(w)=0 in (1/sqrt3, 1]."""
    return math.sqrt((1.0 + math.sqrt(1.0 - 24.0 * mu)) / 3.0)


def singular_period(mu: float) -> float:
    """Slow time of the singular orbit at level mu (two slow arcs)."""
    _check_mu_open(mu)
    wmin = slow_arc_wmin(mu)
    # radicand = 3/4 (w^2 - wmin^2)(w^2 - b); with w = wmin + t^2 the factor t cancels
    b = (1.0 - math.sqrt(1.0 - 24.0 * mu)) / 3.0
    c = 2.0 / math.sqrt(3.0)

    def integrand(t):
        w = wmin + t * t
        return c * (3.0 * w * w - 1.0) / math.sqrt((w + wmin) * (w * w - b))

    tmax = math.sqrt(max(1.0 - wmin, 0.0))
    if tmax == 0.0:
        return 0.0
    val, _ = integrate.quad(integrand, 0.0, tmax, epsabs=1e-15, epsrel=1e-13, limit=200)
    return 4.0 * val


def _check_mu_open(mu):
    if not (MU_MIN < mu < MU_MAX):
        raise DomainError(
            f"singular orbits with two fast and two slow pieces need mu in (-1/8, 1/24), got {mu}"
        )


@dataclass
class SingularOrbit:
    mu: float
    slow_arc_left: np.ndarray
    slow_arc_right: np.ndarray
    jump_up: np.ndarray
    jump_down: np.ndarray
    T0: float
    u_jump: float
    xi: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "T0": self.T0,
            "u_jump": self.u_jump,
            "slow_arc_left": self.slow_arc_left.tolist(),
            "slow_arc_right": self.slow_arc_right.tolist(),
            "jump_up": self.jump_up.tolist(),
            "jump_down": self.jump_down.tolist(),
        }


def singular_orbit(mu: float, n_arc: int = 401, n_jump: int = 201, xi_max: float = 20.0) -> SingularOrbit:
    """Two slow arcs on C0 joined by the v=0 heteroclinics at u = -/+ sqrt(2 mu + 1/4)."""
    _check_mu_open(mu)
    u_jump = jump_points(mu)[0]
    wmin = slow_arc_wmin(mu)
    half = (n_arc + 1) // 2
    ws = np.linspace(1.0, wmin, half)
    us = np.sqrt(np.maximum(_slow_arc_radicand(ws, mu), 0.0))
    us[0] = u_jump
    us[-1] = 0.0
    # right arc: touch-down at u=-u_jump, turning at wmin, take-off at +u_jump
    w_arc = np.concatenate([ws, ws[-2::-1]])
    u_arc = np.concatenate([-us, us[-2::-1]])
    right = np.stack([u_arc, critical_manifold_v(w_arc), w_arc, np.zeros_like(w_arc)], axis=-1)
    left = -right

    xi = np.linspace(-xi_max, xi_max, n_jump)
    w_up, z_up = heteroclinic_profile(xi, "up")
    w_dn, z_dn = heteroclinic_profile(xi, "down")
    zeros = np.zeros_like(xi)
    jump_up = np.stack([np.full_like(xi, -u_jump), zeros, w_up, z_up], axis=-1)
    jump_down = np.stack([np.full_like(xi, u_jump), zeros, w_dn, z_dn], axis=-1)
    return SingularOrbit(
        mu=mu,
        slow_arc_left=left,
        slow_arc_right=right,
        jump_up=jump_up,
        jump_down=jump_down,
        T0=singular_period(mu),
        u_jump=u_jump,
        xi=xi,
    )


# ---------------------------------------------------------------------------
# level-set charts of the (2,1) reduction


CHARTS = ("v-chart", "u-plus-chart", "u-minus-chart")


def chart_v(u, w, z, mu):
    return (4 * u**2 - 8 * mu - 2 * w**2 + w**4 - 4 * z**2) / (8 * w)


def chart_u_radicand(v, w, z, mu):
    return 8 * v * w + 2 * w**2 - w**4 + 4 * z**2 + 8 * mu


def chart_to_full(y, mu: float, chart: str) -> np.ndarray:
    """Lift chart coordinates to a 4D state on the level ``H = mu``.

    v-chart coordinates are ``(u, w, z)``; u-charts use ``(v, w, z)``.
    """
    a, w, z = (float(c) for c in y)
    if chart == "v-chart":
        if abs(w) < V_CHART_MIN_W:
            raise ChartError(f"v-chart needs |w| >= {V_CHART_MIN_W}, got w={w}")
        return np.array([a, chart_v(a, w, z, mu), w, z])
    if chart in ("u-plus-chart", "u-minus-chart"):
        rad = chart_u_radicand(a, w, z, mu)
        if rad < -1e-12:
            raise ChartError(f"negative radicand {rad} in {chart}")
        u = 0.5 * math.sqrt(max(rad, 0.0))
        if chart == "u-minus-chart":
            u = -u
        return np.array([u, a, w, z])
    raise ValueError(f"unknown chart {chart!r}")


def reduced3_vector_field(y, p: ParamSet, chart: str = "v-chart") -> np.ndarray:
    """(2,1) fast-slow system on ``H = mu``.

    The v-chart returns slow-scale rates of ``(u, w, z)``; the u-charts return
    fast-scale rates of ``(v, w, z)`` (they describe the jumps).
    """
    a, w, z = (float(c) for c in y)
    if chart == "v-chart":
        if p.epsilon <= 0.0:
            raise DomainError("v-chart rates are on the slow scale and need epsilon > 0")
        if abs(w) < V_CHART_MIN_W:
            raise ChartError(f"v-chart needs |w| >= {V_CHART_MIN_W}, got w={w}")
        v = chart_v(a, w, z, p.mu)
        return np.array([w, z / p.epsilon, (0.5 * (w**3 - w) - v) / p.epsilon])
    if chart in ("u-plus-chart", "u-minus-chart"):
        rad = chart_u_radicand(a, w, z, p.mu)
        if rad < -1e-12:
            raise ChartError(f"negative radicand {rad} in {chart}")
        sign = 1.0 if chart == "u-plus-chart" else -1.0
        dv = sign * 0.5 * p.epsilon * math.sqrt(max(rad, 0.0))
        return np.array([dv, z, 0.5 * (w**3 - w) - a])
    raise ValueError(f"unknown chart {chart!r}")
