"""Starting orbits: saddle-type slow manifolds, reversible quarter orbits, reflection."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import bvp, model
from .continuation import OrbitProfile, refine, solve_periodic
from .errors import ChartError, IntegrationError, SeedError, SolverError
from .integrate import IntegratorConfig, integrate, integrate_ode

log = logging.getLogger(__name__)

SEED_MU_OFFSET = 1e-3
SEED_EPS_RANGE = (1e-4, 1e-2)
# above this epsilon the singular guess is too crude; march up from here
HOMOTOPY_START = 2e-3


# ---------------------------------------------------------------------------
# slow manifolds of saddle type


def _vchart_rhs(Y, eps, mu):
    u, w, z = Y[..., 0], Y[..., 1], Y[..., 2]
    v = model.chart_v(u, w, z, mu)
    return np.stack([w, z / eps, (0.5 * (w**3 - w) - v) / eps], axis=-1)


def _vchart_jac(Y, eps, mu):
    u, w, z = Y[..., 0], Y[..., 1], Y[..., 2]
    v = model.chart_v(u, w, z, mu)
    J = np.zeros(Y.shape[:-1] + (3, 3))
    J[..., 0, 1] = 1.0
    J[..., 1, 2] = 1.0 / eps
    J[..., 2, 0] = -u / (w * eps)
    J[..., 2, 1] = (w**2 + v / w) / eps
    J[..., 2, 2] = z / (w * eps)
    return J


def critical_point_vchart(u: float, mu: float, side: int) -> np.ndarray:
    """Point of C0 on the level ``mu`` in v-chart coordinates, outer branch ``side`` (+1/-1)."""
    # (w^2 - 1)(3 w^2 + 1) = 4 u^2 - 8 mu - 1 on z = 0, v = (w^3 - w)/2
    rhs = 4.0 * u * u - 8.0 * mu - 1.0
    w2 = (1.0 + math.sqrt(4.0 + 3.0 * rhs)) / 3.0
    return np.array([u, side * math.sqrt(w2), 0.0])


@dataclass
class SmstBoundaryData:
    """Boundary manifolds for the slow-manifold BVP on one outer branch.

    ``B_l`` is the plane through ``p_l`` with normal ``n_l``; ``B_r`` is the
    line through ``p_r`` orthogonal to both rows of ``N_r``.
    """

    mu: float
    epsilon: float
    side: int
    p_l: np.ndarray
    n_l: np.ndarray
    p_r: np.ndarray
    N_r: np.ndarray
    T_s: float
    angles: tuple

    @classmethod
    def build(cls, mu: float, epsilon: float, side: int = -1, half_width: float = 0.3) -> "SmstBoundaryData":
        if not (model.MU_MIN <= mu < model.MU_MAX):
            raise ValueError(f"mu must lie in [-1/8, 1/24), got {mu}")
        if not (0.0 < epsilon <= 0.1):
            raise ValueError(f"epsilon must lie in (0, 0.1], got {epsilon}")
        if side not in (-1, 1):
            raise ValueError("side must be +1 or -1")
        # on the left branch u decreases along the flow
        u_start, u_end = -side * half_width, side * half_width
        p_l = critical_point_vchart(u_start, mu, side)
        p_r = critical_point_vchart(u_end, mu, side)
        slow_l, unst_l, stab_l = _slow_and_fast(p_l, epsilon, mu, side)
        slow_r, unst_r, stab_r = _slow_and_fast(p_r, epsilon, mu, side)
        # B_l contains the slow and unstable directions: transverse to the stable one
        n_l = np.cross(slow_l, unst_l)
        n_l /= np.linalg.norm(n_l)
        # B_r is the line along the stable direction: transverse to slow + unstable
        basis = np.linalg.svd(stab_r.reshape(1, 3))[2][1:]
        angles = (_angle_to_plane(stab_l, n_l), _angle_line_plane(stab_r, np.cross(slow_r, unst_r)))
        for a in angles:
            if a <= 1e-3:
                raise SeedError(f"boundary manifold not transverse (angle {a:.2e} rad)")
        T_s = _arc_time(mu, side, u_start, u_end)
        return cls(mu, epsilon, side, p_l, n_l, p_r, basis, T_s, angles)


def _slow_and_fast(p, eps, mu, side):
    J = _vchart_jac(p, eps, mu)
    vals, vecs = np.linalg.eig(J)
    order = np.argsort(vals.real)
    stab = np.real(vecs[:, order[0]])
    unst = np.real(vecs[:, order[-1]])
    # slow direction: tangent of the critical curve
    du = 1e-6
    q1 = critical_point_vchart(p[0] + du, mu, side)
    q0 = critical_point_vchart(p[0] - du, mu, side)
    slow = (q1 - q0) / np.linalg.norm(q1 - q0)
    return slow, unst / np.linalg.norm(unst), stab / np.linalg.norm(stab)


def _angle_to_plane(vec, normal):
    c = abs(vec @ normal) / (np.linalg.norm(vec) * np.linalg.norm(normal))
    return math.asin(min(c, 1.0))


def _angle_line_plane(line, plane_normal):
    return _angle_to_plane(line, plane_normal)


def _arc_time(mu, side, u0, u1, n=2001):
    us = np.linspace(u0, u1, n)
    ws = np.array([abs(critical_point_vchart(u, mu, side)[1]) for u in us])
    return float(np.trapezoid(1.0 / ws, x=np.abs(us - u0)))


@dataclass
class SlowManifoldSegment:
    data: SmstBoundaryData
    sol: bvp.BvpSolution
    w_sym: float
    z_sym: float
    t_sym: float
    boundary_residual: float

    def states(self, t=None) -> np.ndarray:
        """Full 4D states along the segment (normalized time)."""
        Y = self.sol.y if t is None else self.sol(t)
        v = model.chart_v(Y[:, 0], Y[:, 1], Y[:, 2], self.data.mu)
        return np.stack([Y[:, 0], v, Y[:, 1], Y[:, 2]], axis=-1)


def smst_slow_manifold(data: SmstBoundaryData, n_intervals: int = 200, passes: int = 4) -> SlowManifoldSegment:
    """Trajectory on the saddle-type slow manifold between ``B_l`` and ``B_r``.

    The transit time is held at the value of the critical-manifold arc; with a
    free time the three boundary conditions would leave a one-parameter family.
    """
    eps, mu, T = data.epsilon, data.mu, data.T_s

    def f(t, Y, p):
        return T * _vchart_rhs(Y, eps, mu)

    def f_jac(t, Y, p):
        return T * _vchart_jac(Y, eps, mu), np.zeros(Y.shape[:1] + (3, 0))

    def bc(ya, yb, p):
        return np.concatenate([[data.n_l @ (ya - data.p_l)], data.N_r @ (yb - data.p_r)])

    def bc_jac(ya, yb, p):
        Ja = np.zeros((3, 3))
        Jb = np.zeros((3, 3))
        Ja[0] = data.n_l
        Jb[1:] = data.N_r
        return Ja, Jb, np.zeros((3, 0))

    problem = bvp.BvpProblem(3, 0, f, bvp.boundary_conditions(bc, 3, bc_jac), f_jac)
    u0, u1 = data.p_l[0], data.p_r[0]

    def guess_fn(t):
        t = np.atleast_1d(t)
        us = u0 + (u1 - u0) * t
        return np.array([critical_point_vchart(u, mu, data.side) for u in us])

    sol = bvp.BvpSolution.from_function(bvp.Mesh.uniform(n_intervals), guess_fn, np.zeros(0))
    try:
        sol = bvp.newton_solve(problem, sol, tol=1e-11, max_iter=40)
        for _ in range(passes):
            mesh = bvp.adapt_mesh(sol, tol=1e-10)
            if mesh is sol.mesh:
                break
            sol = bvp.newton_solve(problem, sol.remesh(mesh), tol=1e-11, max_iter=40)
    except (SolverError, ChartError) as exc:
        raise SeedError(
            f"slow-manifold BVP failed ({exc}); retry with a guess closer to the critical-manifold arc"
        ) from exc
    R = bc(sol.y[0], sol.y[-1], sol.p)
    t_sym = _find_root(lambda s: float(sol(np.array([s]))[0, 0]), 0.0, 1.0)
    ys = sol(np.array([t_sym]))[0]
    return SlowManifoldSegment(data, sol, float(ys[1]), float(ys[2]), t_sym, float(np.max(np.abs(R))))


def _find_root(g, a, b):
    return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# reversible quarter orbits by multiple shooting


def _variational_rhs(eps):
    def rhs(t, y):
        x = y[:4]
        u, v, w, z = x
        Phi = y[4:].reshape(4, 4)
        fx = np.array([w, u, z / eps, (0.5 * (w**3 - w) - v) / eps])
        J = np.array(
            [
                [0.0, 0.0, 1.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0 / eps],
                [0.0, -1.0 / eps, (1.5 * w**2 - 0.5) / eps, 0.0],
            ]
        )
        return np.concatenate([fx, (J @ Phi).ravel()])

    return rhs


def _flow_with_sensitivity(x0, dt, eps, cfg):
    y0 = np.concatenate([x0, np.eye(4).ravel()])
    traj = integrate_ode(_variational_rhs(eps), (0.0, dt), y0, cfg)
    yf = traj.final
    return yf[:4], yf[4:].reshape(4, 4), traj


@dataclass
class QuarterOrbit:
    mu: float
    epsilon: float
    v0: float
    w0: float
    T_quarter: float
    segments: list
    nodes: np.ndarray
    residual: float
    condition: float
    iterations: int

    @property
    def period(self) -> float:
        return 4.0 * self.T_quarter

    def quarter(self, t) -> np.ndarray:
        """State at times ``t`` in [0, T_quarter]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        M = len(self.segments)
        dt = self.T_quarter / M
        out = np.empty((t.size, 4))
        for k, tk in enumerate(t):
            j = min(max(int(tk // dt), 0), M - 1)
            out[k] = self.segments[j](tk - j * dt)[:4]
        return out

    def full(self, t) -> np.ndarray:
        """Assembled periodic orbit at times ``t`` (any real values)."""
        T = self.T_quarter
        t = np.mod(np.atleast_1d(np.asarray(t, dtype=float)), 4.0 * T)
        out = np.empty((t.size, 4))
        for k, tk in enumerate(t):
            if tk <= T:
                out[k] = self.quarter(tk)[0]
            elif tk <= 2.0 * T:
                out[k] = model.reflect_r2(self.quarter(2.0 * T - tk)[0])
            else:
                out[k] = model.reflect_r(self.full(4.0 * T - tk)[0])
        return out


def _quarter_guess(mu, eps, w0, T_q, t):
    """Slow arc on the left outer branch followed by half an up-jump ending at w = 0."""
    u_j = math.sqrt(max(2.0 * mu + 0.25, 0.0))
    t_slow = max(T_q - 10.0 * eps, 0.5 * T_q)
    out = np.empty((len(t), 4))
    for k, tk in enumerate(t):
        if tk <= t_slow:
            u = -u_j * tk / t_slow
            p = critical_point_vchart(u, mu, -1)
            w = p[1] if tk > 0 else w0
            out[k] = [u, 0.5 * (w**3 - w), w, 0.0]
        else:
            xi = (tk - T_q) / eps
            w, z = model.heteroclinic_profile(xi, "up")
            out[k] = [-u_j, 0.0, float(w), float(z)]
    return out


def quarter_orbit_shoot(
    mu: float,
    epsilon: float,
    guess: tuple,
    seg_time: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 40,
    rel_tol: float = 1e-12,
    interior=None,
) -> QuarterOrbit:
    """Reversible quarter orbit from Fix(R) to Fix(R2) on the level ``mu``.

    Unknowns ``v0, w0, T`` with ``x(0) = (0, v0, w0, 0)``; conditions
    ``v(T) = w(T) = 0`` and ``H(x(0)) = mu``.  The interval is split into
    segments of length about ``seg_time`` (default ``5 eps``) whose start
    states are extra unknowns matched by continuity, which keeps the
    linearization well conditioned on the saddle-type slow part.
    ``interior(s)`` optionally supplies start states at fractions ``s`` of
    the quarter period (e.g. a nearby converged quarter orbit).
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    v0, w0, T = (float(g) for g in guess)
    if not all(math.isfinite(g) for g in (v0, w0, T)):
        raise ValueError("guess must be finite")
    if w0 >= 0.0:
        raise ValueError("the quarter orbit starts on the left branch (w0 < 0)")
    seg_time = seg_time or 5.0 * epsilon
    M = max(1, int(math.ceil(T / seg_time)))
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=1e-14)

    if interior is None:
        starts = _quarter_guess(mu, epsilon, w0, T, np.arange(M) * T / M)
    else:
        starts = np.asarray(interior(np.arange(M) / M), dtype=float).reshape(M, 4)
    starts[0] = [0.0, v0, w0, 0.0]
    X = np.concatenate([[v0, w0, T], starts[1:].ravel()])
    n = X.size

    def evaluate(X, jac=True):
        v0, w0, T = X[:3]
        S = np.vstack([[0.0, v0, w0, 0.0], X[3:].reshape(M - 1, 4)]) if M > 1 else np.array([[0.0, v0, w0, 0.0]])
        dt = T / M
        R = np.empty(n)
        Jm = np.zeros((n, n)) if jac else None
        segs = []
        for j in range(M):
            if jac:
                xe, Phi, traj = _flow_with_sensitivity(S[j], dt, epsilon, cfg)
            else:
                traj = integrate(S[j], model.ParamSet(epsilon, mu), (0.0, dt), cfg)
                xe = traj.final
            segs.append(traj)
            fe = model.vector_field_slow(xe, model.ParamSet(epsilon, mu)) / M
            if j < M - 1:
                rows = slice(4 * j, 4 * j + 4)
                R[rows] = xe - S[j + 1]
                if jac:
                    _state_cols(Jm, rows, j, Phi)
                    Jm[rows, 2] = fe
                    Jm[rows, 3 + 4 * j : 3 + 4 * j + 4] = -np.eye(4)
            else:
                rows = slice(4 * j, 4 * j + 2)
                R[rows] = xe[1:3]
                if jac:
                    _state_cols(Jm, rows, j, Phi[1:3])
                    Jm[rows, 2] = fe[1:3]
        x0 = np.array([0.0, v0, w0, 0.0])
        R[-1] = float(model.hamiltonian(x0)) - mu
        if jac:
            g = model.hamiltonian_gradient(x0)
            Jm[-1, 0], Jm[-1, 1] = g[1], g[2]
        return R, Jm, segs

    it = 0
    R, Jm, segs = evaluate(X)
    rnorm = float(np.max(np.abs(R)))
    merit = float(R @ R)
    try:
        while rnorm > tol:
            if it >= max_iter:
                raise SeedError(f"quarter-orbit Newton did not converge (residual {rnorm:.3e})")
            dX = np.linalg.solve(Jm, -R)
            alpha = 1.0
            while True:
                Xt = X + alpha * dX
                if Xt[2] > 0.0:
                    try:
                        Rt, _, _ = evaluate(Xt, jac=False)
                        mt = float(Rt @ Rt)
                    except IntegrationError:
                        mt = math.inf
                    # Armijo test on the squared 2-norm
                    if mt <= (1.0 - 1e-4 * alpha) * merit:
                        break
                alpha *= 0.5
                if alpha < 2.0**-12:
                    raise SeedError(f"quarter-orbit Newton stalled (residual {rnorm:.3e})")
            X = Xt
            it += 1
            R, Jm, segs = evaluate(X)
            rnorm = float(np.max(np.abs(R)))
            merit = float(R @ R)
    except np.linalg.LinAlgError as exc:
        raise SeedError(f"singular quarter-orbit linearization: {exc}") from exc
    cond = float(np.linalg.cond(Jm))
    log.info("quarter orbit: residual %.2e, condition %.2e, %d segments", rnorm, cond, M)
    nodes = np.vstack([[0.0, X[0], X[1], 0.0], X[3:].reshape(M - 1, 4)]) if M > 1 else np.array([[0.0, X[0], X[1], 0.0]])
    return QuarterOrbit(mu, epsilon, float(X[0]), float(X[1]), float(X[2]), segs, nodes, rnorm, cond, it)


def _state_cols(Jm, rows, j, Phi):
    if j == 0:
        # only v0 and w0 are free in the first start state
        Jm[rows, 0] = Phi[:, 1]
        Jm[rows, 1] = Phi[:, 2]
    else:
        Jm[rows, 3 + 4 * (j - 1) : 3 + 4 * j] = Phi


def _quarter_by_homotopy(mu: float, epsilon: float, w_start: float, factor: float = 1.5) -> QuarterOrbit:
    """Reach ``epsilon`` by geometric steps from ``HOMOTOPY_START``, reusing each quarter orbit."""
    eps = HOMOTOPY_START
    T_guess = math.sqrt(2.0 * mu + 0.25) + 10.0 * eps
    q = quarter_orbit_shoot(mu, eps, (0.0, w_start, T_guess))
    while eps < epsilon:
        step = factor
        while True:
            eps_new = min(eps * step, epsilon)
            prev = q
            fn = lambda s, prev=prev: prev.quarter(np.asarray(s) * prev.T_quarter)  # noqa: E731
            try:
                q = quarter_orbit_shoot(mu, eps_new, (prev.v0, prev.w0, prev.T_quarter), interior=fn)
                break
            except SeedError:
                step = math.sqrt(step)
                if step < 1.01:
                    raise
        eps = eps_new
    return q


# ---------------------------------------------------------------------------
# assembled seed


def profile_from_quarter(q: QuarterOrbit, n_intervals: int = 400) -> OrbitProfile:
    """Collocation profile of the reflected orbit on a mesh graded toward the jumps."""
    P = q.period
    frac_fast = min(0.5, 40.0 * q.epsilon / q.T_quarter) if q.T_quarter > 0 else 0.5
    # quarter of the period: slow part then the fast half-jump; mirror the grading
    t_fast = 1.0 - frac_fast
    n_q = max(n_intervals // 4, 3)
    n_slow = max(n_q // 2, 1)
    quarter = np.concatenate(
        [np.linspace(0.0, t_fast, n_slow + 1)[:-1], np.linspace(t_fast, 1.0, n_q - n_slow + 1)]
    )
    q_nodes = 0.25 * quarter
    nodes = np.concatenate([q_nodes, 0.5 - q_nodes[::-1][1:], 0.5 + q_nodes[1:], 1.0 - q_nodes[::-1][1:]])
    mesh = bvp.Mesh(nodes)
    fn = lambda t: q.full(np.asarray(t) * P)  # noqa: E731
    sol = bvp.BvpSolution.from_function(mesh, fn, np.array([P, 0.0]))
    return OrbitProfile(sol, model.ParamSet(q.epsilon, q.mu))


def build_seed_orbit(epsilon: float, mu_offset: float = SEED_MU_OFFSET, n_intervals: int = 400) -> OrbitProfile:
    """Converged periodic orbit at ``mu = -1/8 + mu_offset``."""
    lo, hi = SEED_EPS_RANGE
    if not (lo <= epsilon <= hi):
        raise ValueError(
            f"seeding needs epsilon in [{lo}, {hi}]; continue in epsilon from a seeded orbit instead"
        )
    data = SmstBoundaryData.build(model.MU_MIN, epsilon, side=-1)
    seg = smst_slow_manifold(data)
    mu = model.MU_MIN + mu_offset
    u_j = math.sqrt(2.0 * mu + 0.25)
    T_guess = u_j + 10.0 * epsilon
    try:
        q = quarter_orbit_shoot(mu, epsilon, (0.0, seg.w_sym, T_guess))
    except SeedError:
        if epsilon <= HOMOTOPY_START:
            raise
        q = _quarter_by_homotopy(mu, epsilon, seg.w_sym)
    prof = profile_from_quarter(q, n_intervals)
    try:
        prof = solve_periodic(prof)
        prof = refine(prof, passes=3)
    except SolverError as exc:
        raise SeedError(f"periodic BVP did not converge from the reflected quarter orbit: {exc}") from exc
    if prof.residual > 1e-10:
        raise SeedError(f"seed residual {prof.residual:.3e} above 1e-10")
    return prof
