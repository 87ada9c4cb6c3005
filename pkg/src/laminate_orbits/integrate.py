"""Dormand-Prince 5(4) integration with events and Hamiltonian-level projection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import model
from .errors import DomainError, IntegrationError, ProjectionError, ResourceError

# Dormand-Prince tableau (Hairer, Norsett & Wanner, Solving ODEs I, p. 178)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# continuous extension of order 4 (Shampine's coefficients)
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SECTIONS = {"u=0": 0, "v=0": 1, "w=0": 2, "z=0": 3}


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 10**7
    projection: bool = False
    first_step: float | None = None
    # constant step size, no error control (used for convergence-order checks)
    fixed_step: float | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class EventSpec:
    """Section crossing ``function(t, x) = 0``.

    ``function`` is either a callable or one of ``"u=0"``, ``"v=0"``,
    ``"w=0"``, ``"z=0"``.  ``direction`` +1 / -1 / 0 selects increasing,
    decreasing or any crossing.
    """

    function: str | Callable
    direction: int = 0
    terminal: bool = False

    def __call__(self, t, x):
        if callable(self.function):
            return float(self.function(t, x))
        return float(x[SECTIONS[self.function]])


@dataclass
class EventRecord:
    index: int
    t: float
    state: np.ndarray


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    events: list = field(default_factory=list)
    terminated: bool = False
    _dense: list = field(default_factory=list, repr=False)

    def __call__(self, t):
        """Dense output; ``t`` scalar or array inside the integrated span."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        ts = np.atleast_1d(t)
        out = np.empty((ts.size, self.x.shape[1]))
        direction = 1.0 if self.t[-1] >= self.t[0] else -1.0
        knots = direction * self.t
        for k, tk in enumerate(ts):
            i = int(np.searchsorted(knots, direction * tk, side="right")) - 1
            i = min(max(i, 0), len(self._dense) - 1)
            out[k] = _dense_eval(self._dense[i], tk)
        return out[0] if scalar else out

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]


def _dense_eval(seg, t):
    t0, h, y0, K = seg
    theta = (t - t0) / h
    powers = np.array([theta, theta**2, theta**3, theta**4])
    return y0 + h * (K.T @ (_P @ powers))


def _dp_step(f, t, y, h, k1):
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 7):
        dy = sum(a * K[j] for j, a in enumerate(_A[s]) if a != 0.0)
        K[s] = f(t + _C[s] * h, y + h * dy)
    y_new = y + h * (K[:6].T @ _B[:6])
    err = h * (K.T @ _E)
    return y_new, err, K


def project_to_level(x, mu: float, tol: float = 1e-14, max_iter: int = 10) -> np.ndarray:
    """Newton along the gradient ray onto the level set ``H = mu``."""
    x = np.array(model.as_state(x), dtype=float)
    g = model.hamiltonian_gradient(x)
    gn2 = float(g @ g)
    if gn2 <= 1e-28:
        raise ProjectionError(f"gradient norm {math.sqrt(gn2):.3e} too small to project")
    for _ in range(max_iter + 1):
        r = float(model.hamiltonian(x)) - mu
        if abs(r) <= tol:
            return x
        g = model.hamiltonian_gradient(x)
        gn2 = float(g @ g)
        if gn2 <= 1e-28:
            raise ProjectionError("gradient vanished during projection")
        x = x - g * (r / gn2)
    raise ProjectionError(f"projection did not reach |H - mu| <= {tol} in {max_iter} iterations")


def integrate_ode(
    f: Callable,
    t_span,
    y0,
    cfg: IntegratorConfig | None = None,
    events=(),
    level: Callable | None = None,
) -> Trajectory:
    """Integrate ``y' = f(t, y)`` over ``t_span``; negative spans run backward.

    ``level`` is an optional map applied to every accepted state (used for
    projection onto a first integral).
    """
    cfg = cfg or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    ts, ys, dense, records = [t0], [y.copy()], [], []
    if span == 0.0:
        return Trajectory(np.array(ts), np.array(ys), records, False, [(t0, 1.0, y, np.zeros((7, y.size)))])

    k1 = np.asarray(f(t0, y), dtype=float)
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    if cfg.fixed_step is not None:
        h = min(cfg.fixed_step, span)
    elif cfg.first_step is not None:
        h = min(cfg.first_step, span)
    else:
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, span, cfg.max_step)
    ev_prev = [ev(t0, y) for ev in events]

    beta, expo1, safe = 0.04, 0.2 - 0.04 * 0.75, 0.9
    err_old = 1e-4
    t = t0
    n_steps = 0
    terminated = False
    while direction * (t1 - t) > 0.0:
        if n_steps >= cfg.max_steps:
            raise ResourceError(f"max_steps={cfg.max_steps} exceeded at t={t}")
        h = min(h, abs(t1 - t), cfg.max_step)
        if h < 16.0 * np.finfo(float).eps * max(abs(t), 1.0):
            raise IntegrationError(f"step size underflow at t={t}", t=t, state=y.copy())
        hs = direction * h
        y_new, err, K = _dp_step(f, t, y, hs, k1)
        n_steps += 1
        if cfg.fixed_step is not None:
            err_norm = 0.0
        else:
            sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / sc) ** 2)))
            if not np.isfinite(err_norm):
                err_norm = 1e10
        if err_norm > 1.0:
            fac = min(err_norm**expo1 / safe, 10.0)
            h = h / fac
            continue

        t_new = t + hs
        seg = (t, hs, y.copy(), K)
        if level is not None:
            y_new = level(y_new)
        # events on the dense output of this step
        stop = False
        for i, ev in enumerate(events):
            g_new = ev(t_new, y_new)
            g_old = ev_prev[i]
            crossed = (g_old < 0.0 <= g_new and ev.direction >= 0) or (
                g_old > 0.0 >= g_new and ev.direction <= 0
            )
            if crossed and g_old != 0.0:
                def gfun(s, _ev=ev):
                    return _ev(s, _dense_eval(seg, s))

                a, b = sorted((t, t_new))
                ga, gb = gfun(a), gfun(b)
                if ga * gb <= 0.0:
                    te = brentq(gfun, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
                else:
                    te = t_new
                xe = _dense_eval(seg, te)
                records.append(EventRecord(i, te, xe))
                if ev.terminal:
                    stop = True
                    t_stop, y_stop = te, xe
            ev_prev[i] = g_new
        if stop:
            ts.append(t_stop)
            ys.append(y_stop)
            dense.append(seg)
            terminated = True
            break
        ts.append(t_new)
        ys.append(y_new.copy())
        dense.append(seg)
        t, y = t_new, y_new
        k1 = K[6] if level is None else np.asarray(f(t, y), dtype=float)

        if cfg.fixed_step is None:
            fac11 = err_norm**expo1 if err_norm > 0 else 0.0
            fac = fac11 / err_old**beta
            fac = min(max(fac / safe, 1.0 / 10.0), 1.0 / 0.2)
            h = h / fac if fac > 0 else 10.0 * h
            err_old = max(err_norm, 1e-4)
    return Trajectory(np.array(ts), np.array(ys), records, terminated, dense)


def integrate(
    x0,
    p: model.ParamSet,
    t_span,
    cfg: IntegratorConfig | None = None,
    events=(),
) -> Trajectory:
    """Integrate the 4D slow-scale system from ``x0``."""
    if p.epsilon <= 0.0:
        raise DomainError("integration of the full system needs epsilon > 0")
    if not all(math.isfinite(s) for s in t_span):
        raise ValueError("t_span must be finite")
    cfg = cfg or IntegratorConfig()
    x0 = np.array(model.as_state(x0), dtype=float)
    eps = p.epsilon

    def rhs(t, x):
        u, v, w, z = x
        return np.array([w, u, z / eps, (0.5 * (w**3 - w) - v) / eps])

    level = None
    if cfg.projection:
        mu0 = float(model.hamiltonian(x0))

        def level(x):
            try:
                return project_to_level(x, mu0)
            except ProjectionError:
                return x

    return integrate_ode(rhs, t_span, x0, cfg, events, level)
