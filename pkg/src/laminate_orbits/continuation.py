"""Periodic orbits as boundary-value problems and their pseudo-arclength continuation.

An orbit of period P is a solution on t in [0, 1] of

    x' = P (F(x; eps) + lam grad H(x)),   x(1) = x(0),
    int <x - x_ref, x_ref'> dt = 0,       H(x(0)) = mu.

Because H is conserved by F, periodicity forces the unfolding scalar ``lam``
to vanish; keeping it as an unknown makes the system square and regular.
During continuation the active parameter (``mu`` or ``ln eps``) becomes a
third unknown and the pseudo-arclength equation closes the system.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import bvp, model
from .errors import AssemblyError, DomainError, SolverError

log = logging.getLogger(__name__)

EPS_RANGE = (1e-7, 1e-1)
MU_RANGE = (model.MU_MIN, model.MU_MAX)
DEFAULT_N = 200


# ---------------------------------------------------------------------------
# orbit profiles


@dataclass
class OrbitProfile:
    """A periodic orbit on normalized time; ``sol.p = [P, lam]``."""

    sol: bvp.BvpSolution
    params: model.ParamSet

    @property
    def P(self) -> float:
        return float(self.sol.p[0])

    @property
    def lam(self) -> float:
        return float(self.sol.p[1])

    @property
    def mesh(self) -> bvp.Mesh:
        return self.sol.mesh

    @property
    def states(self) -> np.ndarray:
        return self.sol.y

    @property
    def residual(self) -> float:
        return self.sol.residual

    @property
    def iterations(self) -> int:
        return self.sol.iterations

    def __call__(self, t):
        return self.sol(np.mod(t, 1.0))

    def closure(self) -> float:
        return float(np.linalg.norm(self.sol.y[-1] - self.sol.y[0]))

    def level_defect(self) -> float:
        """Max |H - mu| over nodes and collocation stages."""
        H = np.concatenate([model.hamiltonian(self.sol.y), model.hamiltonian(self.sol.Y).ravel()])
        return float(np.max(np.abs(H - self.params.mu)))

    def norm(self) -> float:
        """L2 norm of the profile over one normalized period."""
        wq = self.mesh.quadrature_weights()
        return float(math.sqrt(np.sum(wq[..., None] * self.sol.Y**2)))

    def symmetry_defect(self, n_samples: int = 400) -> float:
        """max_t |x(t + 1/2) + x(t)| (the S1 symmetry -x)."""
        t = np.linspace(0.0, 1.0, n_samples, endpoint=False)
        return float(np.max(np.linalg.norm(self(t + 0.5) + self(t), axis=1)))

    def time_shifted(self, shift: float) -> "OrbitProfile":
        fn = lambda t: self(np.asarray(t) + shift)  # noqa: E731
        sol = bvp.BvpSolution.from_function(self.mesh, fn, self.sol.p.copy())
        return OrbitProfile(sol, self.params)

    def with_params(self, **kw) -> "OrbitProfile":
        eps = kw.get("epsilon", self.params.epsilon)
        mu = kw.get("mu", self.params.mu)
        sol = bvp.BvpSolution(self.mesh, self.sol.y.copy(), self.sol.Y.copy(), self.sol.p.copy())
        return OrbitProfile(sol, model.ParamSet(eps, mu))

    def remesh(self, mesh: bvp.Mesh) -> "OrbitProfile":
        return OrbitProfile(self.sol.remesh(mesh), self.params)

    def summary(self) -> dict:
        return {
            "P": self.P,
            "mu": self.params.mu,
            "eps": self.params.epsilon,
            "lambda": self.lam,
            "norm": self.norm(),
            "residual": self.residual,
            "N": self.mesh.N,
        }


# ---------------------------------------------------------------------------
# the periodic boundary-value problem


class PeriodicSystem:
    """Builds the collocation problem for a given reference and active parameter.

    ``active`` is ``None`` (fixed eps and mu), ``"mu"`` or ``"epsilon"``; the
    epsilon unknown is ``ln eps``.  ``arclength`` is ``(U_pred, T, weights)``
    or ``None``.
    """

    def __init__(self, eps, mu, reference: bvp.BvpSolution, active=None, arclength=None):
        self.eps = eps
        self.mu = mu
        self.active = active
        self.arclength = arclength
        wq = reference.mesh.quadrature_weights()
        self.ref_Y = reference.Y
        self.ref_K = reference.stage_slopes()
        self.phase_scale = float(np.sum(wq[..., None] * self.ref_K**2)) or 1.0
        self.wq = wq
        q = 2 if active is None else 3
        self.problem = bvp.BvpProblem(4, q, self.f, self.conditions, self.f_jac)

    def _eps_mu(self, p):
        eps, mu = self.eps, self.mu
        if self.active == "epsilon":
            eps = math.exp(p[2])
        elif self.active == "mu":
            mu = p[2]
        return eps, mu

    def f(self, t, Y, p):
        eps, _ = self._eps_mu(p)
        P, lam = p[0], p[1]
        u, v, w, z = Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3]
        g = 0.5 * (w**3 - w) - v
        F = np.stack([w, u, z / eps, g / eps], axis=1)
        G = np.stack([u, -w, -g, -z], axis=1)
        return P * (F + lam * G)

    def f_jac(self, t, Y, p):
        eps, _ = self._eps_mu(p)
        P, lam = p[0], p[1]
        u, v, w, z = Y[:, 0], Y[:, 1], Y[:, 2], Y[:, 3]
        g = 0.5 * (w**3 - w) - v
        K = Y.shape[0]
        J = np.zeros((K, 4, 4))
        dg = 1.5 * w**2 - 0.5
        J[:, 0, 2] = 1.0
        J[:, 1, 0] = 1.0
        J[:, 2, 3] = 1.0 / eps
        J[:, 3, 1] = -1.0 / eps
        J[:, 3, 2] = dg / eps
        # lam * Hess H
        J[:, 0, 0] += lam
        J[:, 1, 2] -= lam
        J[:, 2, 1] += lam
        J[:, 2, 2] -= lam * dg
        J[:, 3, 3] -= lam
        J *= P
        F = np.stack([w, u, z / eps, g / eps], axis=1)
        G = np.stack([u, -w, -g, -z], axis=1)
        q = p.size
        Jp = np.zeros((K, 4, q))
        Jp[:, :, 0] = F + lam * G
        Jp[:, :, 1] = P * G
        if self.active == "epsilon":
            Jp[:, 2, 2] = -P * z / eps
            Jp[:, 3, 2] = -P * g / eps
        return J, Jp

    def conditions(self, sol: bvp.BvpSolution) -> bvp.Conditions:
        N, m = sol.mesh.N, sol.mesh.degree
        q = sol.p.size
        k = 6 + (1 if self.arclength is not None else 0)
        r = np.zeros(k)
        dy = np.zeros((k, N + 1, 4))
        dY = np.zeros((k, N, m, 4))
        dp = np.zeros((k, q))
        r[:4] = sol.y[-1] - sol.y[0]
        dy[:4, 0, :] = -np.eye(4)
        dy[:4, -1, :] = np.eye(4)
        wK = self.wq[..., None] * self.ref_K / self.phase_scale
        r[4] = float(np.sum(wK * (sol.Y - self.ref_Y)))
        dY[4] = wK
        _, mu = self._eps_mu(sol.p)
        r[5] = float(model.hamiltonian(sol.y[0])) - mu
        dy[5, 0, :] = model.hamiltonian_gradient(sol.y[0])
        if self.active == "mu":
            dp[5, 2] = -1.0
        if self.arclength is not None:
            U_pred, T, Wt = self.arclength
            U = sol.to_vector()
            r[6] = float(np.sum(Wt * T * (U - U_pred)))
            row = Wt * T
            ny, nY = (N + 1) * 4, N * m * 4
            dy[6] = row[:ny].reshape(N + 1, 4)
            dY[6] = row[ny : ny + nY].reshape(N, m, 4)
            dp[6] = row[ny + nY :]
        return bvp.Conditions(r, dy, dY, dp)


def arclength_weights(mesh: bvp.Mesh, q: int = 3) -> np.ndarray:
    """Inner-product weights on the unknown vector: Gauss weights on stages, 1 on scalars."""
    N, m = mesh.N, mesh.degree
    wq = np.repeat(mesh.quadrature_weights().ravel(), 4)
    return np.concatenate([np.zeros((N + 1) * 4), wq, np.ones(q)])


def periodic_residual(profile: OrbitProfile, reference: OrbitProfile | None = None) -> np.ndarray:
    """Residual of the fixed-parameter periodic BVP at ``profile``.

    Ordering: collocation stages, continuity, periodicity (4), phase, level.
    """
    reference = reference or profile
    if reference.mesh.N != profile.mesh.N or not np.allclose(reference.mesh.nodes, profile.mesh.nodes):
        raise AssemblyError("reference profile must live on the same mesh")
    system = PeriodicSystem(profile.params.epsilon, profile.params.mu, reference.sol)
    R, _ = bvp.assemble(system.problem, profile.sol, jacobian=False)
    return R


def solve_periodic(
    guess: OrbitProfile,
    reference: OrbitProfile | None = None,
    tol: float = 1e-10,
    max_iter: int = 30,
) -> OrbitProfile:
    """Newton-converge an orbit at fixed (eps, mu)."""
    reference = reference or guess
    if reference.mesh is not guess.mesh and (
        reference.mesh.N != guess.mesh.N or not np.allclose(reference.mesh.nodes, guess.mesh.nodes)
    ):
        reference = reference.remesh(guess.mesh)
    system = PeriodicSystem(guess.params.epsilon, guess.params.mu, reference.sol)
    sol = bvp.newton_solve(system.problem, guess.sol, tol=tol, max_iter=max_iter)
    return OrbitProfile(sol, guess.params)


def refine(
    profile: OrbitProfile,
    passes: int = 2,
    n_max: int = bvp.N_MAX,
    tol: float = 1e-10,
    mesh_tol: float | None = 1e-5,
) -> OrbitProfile:
    """Adapt the mesh to the orbit and re-converge, up to ``passes`` times."""
    for _ in range(passes):
        mesh = bvp.adapt_mesh(profile.sol, n_max=n_max, periodic=True, tol=mesh_tol)
        if mesh is profile.mesh:
            break
        profile = solve_periodic(profile.remesh(mesh), tol=tol)
    return profile


# ---------------------------------------------------------------------------
# branches


@dataclass
class BranchPoint:
    step: int
    P: float
    mu: float
    eps: float
    lam: float
    norm: float
    tangent: float = math.nan
    fold: bool = False
    energy: float | None = None

    def as_row(self) -> dict:
        return {
            "step": self.step,
            "mu": self.mu,
            "eps": self.eps,
            "P": self.P,
            "lambda": self.lam,
            "norm": self.norm,
            "fold_flag": int(self.fold),
        }


@dataclass
class StepConfig:
    ds: float = 0.02
    ds_min: float = 1e-6
    ds_max: float = 0.1
    grow: float = 1.3
    max_steps: int = 5000
    adapt_every: int = 10
    corrector_iter: int = 8
    tol: float = 1e-10
    n_max: int = bvp.N_MAX
    n_min: int = 100
    mesh_tol: float = 1e-5
    level_tol: float = 1e-9
    # a visibly nonzero unfolding scalar means the mesh no longer resolves the orbit
    lam_tol: float = 1e-7
    # largest relative period change accepted in one step
    max_dP: float = 0.5


@dataclass
class Branch:
    points: list
    active: str
    fixed_value: float
    profiles: list = field(default_factory=list, repr=False)
    vectors: list = field(default_factory=list, repr=False)
    reason: str = ""
    provenance: dict = field(default_factory=dict)

    def param_values(self) -> np.ndarray:
        key = "mu" if self.active == "mu" else "eps"
        return np.array([getattr(p, key) for p in self.points])

    def periods(self) -> np.ndarray:
        return np.array([p.P for p in self.points])

    def __len__(self):
        return len(self.points)


def _active_value(profile: OrbitProfile, active: str) -> float:
    return profile.params.mu if active == "mu" else math.log(profile.params.epsilon)


def _profile_from(sol: bvp.BvpSolution, active: str, fixed: float) -> OrbitProfile:
    a = float(sol.p[2])
    if active == "mu":
        params = model.ParamSet(fixed, a)
    else:
        params = model.ParamSet(math.exp(a), fixed)
    out = bvp.BvpSolution(sol.mesh, sol.y, sol.Y, sol.p[:2].copy(), sol.residual, sol.iterations, sol.converged)
    return OrbitProfile(out, params)


def _extended(profile: OrbitProfile, active: str) -> bvp.BvpSolution:
    s = profile.sol
    return bvp.BvpSolution(
        s.mesh, s.y.copy(), s.Y.copy(), np.array([s.p[0], s.p[1], _active_value(profile, active)])
    )


def _point(step: int, profile: OrbitProfile, tangent=math.nan) -> BranchPoint:
    return BranchPoint(
        step=step,
        P=profile.P,
        mu=profile.params.mu,
        eps=profile.params.epsilon,
        lam=profile.lam,
        norm=profile.norm(),
        tangent=tangent,
    )


def _wnorm(vec, Wt):
    return math.sqrt(float(np.sum(Wt * vec * vec)))


def branch_tangent(sol: bvp.BvpSolution, system_kw: dict, direction: np.ndarray | None = None) -> np.ndarray:
    """Unit tangent (in the arclength inner product) of the solution family at ``sol``.

    The parameter row normalizes when ``direction`` is None; otherwise the
    tangent satisfies <t, direction>_W = 1 before normalization.
    """
    Wt = arclength_weights(sol.mesh)
    U = sol.to_vector()
    if direction is None:
        direction = np.zeros_like(U)
        direction[-1] = 1.0
    # the arclength row evaluated at U_pred = U is exactly the normalization row
    system = PeriodicSystem(reference=sol, arclength=(U, direction, Wt), **system_kw)
    _, Jac = bvp.assemble(system.problem, sol)
    rhs = np.zeros(U.size)
    rhs[-1] = 1.0
    t = bvp.factorize(Jac).solve(rhs)
    return t / _wnorm(t, Wt)


def continue_branch(
    start: OrbitProfile,
    active: str,
    target: float,
    step: StepConfig | None = None,
    direction: int | None = None,
    param_range: tuple | None = None,
    keep_profiles: bool = True,
    stop=None,
) -> Branch:
    """Pseudo-arclength continuation in ``mu`` or ``epsilon`` toward ``target``.

    ``direction`` (+1/-1) overrides the initial direction, which otherwise
    points toward ``target``.  ``stop(profile, branch)`` may end the run early
    by returning a reason string.  The run ends at the target (landing exactly
    on it), at the admissible range boundary, on step-size underflow or after
    ``max_steps``; failures truncate the branch and record the reason.
    """
    if active not in ("mu", "epsilon"):
        raise ValueError(f"active parameter must be 'mu' or 'epsilon', got {active!r}")
    cfg = step or StepConfig()
    if active == "mu":
        lo, hi = param_range or MU_RANGE
        fixed = start.params.epsilon
        a_target = target
        to_value = lambda a: a  # noqa: E731
    else:
        lo, hi = [math.log(x) for x in (param_range or EPS_RANGE)]
        fixed = start.params.mu
        a_target = math.log(target)
        to_value = math.exp
    a0 = _active_value(start, active)
    if not (lo < a0 < hi) and not (math.isclose(a0, lo) or math.isclose(a0, hi)):
        raise DomainError(f"start value {to_value(a0)} outside admissible range")

    sys_kw = {"eps": start.params.epsilon, "mu": start.params.mu, "active": active}
    U_sol = _extended(start, active)
    branch = Branch([], active, fixed, provenance={"start": start.summary(), "target": target})
    branch.points.append(_point(0, start))
    if keep_profiles:
        branch.profiles.append(start)

    T_sol = branch_tangent(U_sol, sys_kw)
    sign = direction if direction is not None else (1 if a_target >= a0 else -1)
    if np.sign(T_sol[-1]) != sign:
        T_sol = -T_sol
    branch.points[0].tangent = float(T_sol[-1])
    T = T_sol
    ds = cfg.ds
    prev_da = 0.0
    n_ok = 0
    k = 0
    while k < cfg.max_steps:
        Wt = arclength_weights(U_sol.mesh)
        U = U_sol.to_vector()
        U_pred = U + ds * T
        a_pred = U_pred[-1]
        hits_target = (a_pred - a_target) * (U[-1] - a_target) <= 0.0
        if (a_pred < lo or a_pred > hi) and not hits_target:
            # shorten to hit the boundary; give up when already there
            room = (hi - U[-1]) if a_pred > hi else (lo - U[-1])
            if abs(T[-1]) > 0 and abs(room / T[-1]) > cfg.ds_min and abs(room / T[-1]) < ds:
                ds = 0.999 * abs(room / T[-1])
                continue
            branch.reason = "range boundary"
            break
        system = PeriodicSystem(reference=U_sol, arclength=(U_pred, T, Wt), **sys_kw)
        guess = U_sol.with_vector(U_pred)
        try:
            new = bvp.newton_solve(system.problem, guess, tol=cfg.tol, max_iter=cfg.corrector_iter)
        except SolverError as exc:
            ds *= 0.5
            log.debug("corrector failed (%s); ds -> %.3e", exc, ds)
            if ds < cfg.ds_min:
                branch.reason = f"step-size underflow: {exc}"
                break
            continue
        P_old, P_new = float(U_sol.p[0]), float(new.p[0])
        if not P_new > 0.0 or abs(P_new - P_old) > cfg.max_dP * P_old:
            # near folds at small eps the period collapses within one step
            ds *= 0.5
            if ds < cfg.ds_min:
                branch.reason = "step-size underflow: period change too large"
                break
            continue
        k += 1
        a_new = float(new.p[2])
        da = a_new - U[-1]
        secant = new.to_vector() - U
        nrm = _wnorm(secant, Wt)
        T_new = secant / nrm if nrm > 0 else T
        fold_here = prev_da != 0.0 and np.sign(da) != np.sign(prev_da)
        if fold_here:
            branch.points[-1].fold = True
        prev_da = da if da != 0.0 else prev_da

        crossed = (a_new - a_target) * (U[-1] - a_target) <= 0.0 and k > 0 and U[-1] != a_target
        if crossed:
            landed = _land(U_sol, new, a_target, sys_kw, cfg)
            if landed is not None:
                prof = _profile_from(landed, active, fixed)
                branch.points.append(_point(k, prof, float(np.sign(da))))
                if keep_profiles:
                    branch.profiles.append(prof)
                branch.reason = "target reached"
                break

        prof = _profile_from(new, active, fixed)
        branch.points.append(_point(k, prof, float(T_new[-1])))
        if keep_profiles:
            branch.profiles.append(prof)
        if stop is not None:
            why = stop(prof, branch)
            if why:
                branch.reason = why
                break

        old_sol, U_sol, T = U_sol, new, T_new
        if new.iterations <= 3:
            ds = min(ds * cfg.grow, cfg.ds_max)
        n_ok += 1
        due = cfg.adapt_every and n_ok % cfg.adapt_every == 0
        if due or abs(new.p[1]) > cfg.lam_tol or prof.level_defect() > cfg.level_tol:
            mesh = bvp.adapt_mesh(_fixed_view(U_sol), n_max=cfg.n_max, periodic=True, tol=cfg.mesh_tol, n_min=cfg.n_min)
            if mesh is not U_sol.mesh:
                try:
                    U_sol, T = _remesh_point(U_sol, old_sol, mesh, sys_kw, cfg)
                except SolverError as exc:
                    log.debug("re-convergence after remesh failed: %s", exc)
    else:
        branch.reason = "max steps"
    if not branch.reason:
        branch.reason = "max steps"
    return branch


def _fixed_view(sol: bvp.BvpSolution) -> bvp.BvpSolution:
    return bvp.BvpSolution(sol.mesh, sol.y, sol.Y, sol.p[:2])


def _remesh_point(U_sol, old_sol, mesh, sys_kw, cfg):
    """Move the current point (and the previous one, for the secant) to ``mesh``."""
    cur = U_sol.remesh(mesh)
    prev = old_sol.remesh(mesh)
    a = float(cur.p[2])
    kw = dict(sys_kw)
    kw["active"] = None
    if sys_kw["active"] == "mu":
        kw["mu"] = a
    else:
        kw["eps"] = math.exp(a)
    fixed = bvp.BvpSolution(mesh, cur.y, cur.Y, cur.p[:2])
    system = PeriodicSystem(reference=fixed, **kw)
    conv = bvp.newton_solve(system.problem, fixed, tol=cfg.tol, max_iter=cfg.corrector_iter)
    U_new = bvp.BvpSolution(mesh, conv.y, conv.Y, np.array([conv.p[0], conv.p[1], a]), conv.residual, conv.iterations, True)
    Wt = arclength_weights(mesh)
    sec = U_new.to_vector() - prev.to_vector()
    return U_new, sec / _wnorm(sec, Wt)


def _land(U_a, U_b, a_target, sys_kw, cfg):
    """Solve at the exact target value of the active parameter between two points."""
    a0, a1 = float(U_a.p[2]), float(U_b.p[2])
    theta = (a_target - a0) / (a1 - a0) if a1 != a0 else 1.0
    vec = (1 - theta) * U_a.to_vector() + theta * U_b.to_vector()
    guess = U_b.with_vector(vec)
    kw = dict(sys_kw)
    kw["active"] = None
    if sys_kw["active"] == "mu":
        kw["mu"] = a_target
    else:
        kw["eps"] = math.exp(a_target)
    fixed = bvp.BvpSolution(guess.mesh, guess.y, guess.Y, guess.p[:2])
    system = PeriodicSystem(reference=U_b, **kw)
    try:
        conv = bvp.newton_solve(system.problem, fixed, tol=cfg.tol, max_iter=cfg.corrector_iter + 4)
    except SolverError:
        return None
    return bvp.BvpSolution(
        conv.mesh, conv.y, conv.Y, np.array([conv.p[0], conv.p[1], a_target]), conv.residual, conv.iterations, True
    )


# ---------------------------------------------------------------------------
# folds


@dataclass
class FoldPoint:
    index: int
    active: str
    value: float
    P: float
    tangent: float
    profile: OrbitProfile = field(repr=False)
    iterations: int = 0

    @property
    def mu(self) -> float:
        return self.profile.params.mu

    @property
    def eps(self) -> float:
        return self.profile.params.epsilon


def _system_kw(branch: Branch) -> dict:
    if branch.active == "mu":
        return {"eps": branch.fixed_value, "mu": 0.0, "active": "mu"}
    return {"eps": 1.0, "mu": branch.fixed_value, "active": "epsilon"}


def detect_folds(branch: Branch, tol: float = 1e-8, max_iter: int = 60, newton_tol: float = 1e-10) -> list:
    """Localize every sign change of the active-parameter increment along ``branch``.

    Each fold is bracketed by the neighbors of the flagged point and refined
    by Illinois regula falsi on the arclength position along their chord,
    until the parameter component of the unit tangent is below ``tol``.
    """
    if len(branch.points) < 3:
        return []
    a = np.array([p.mu if branch.active == "mu" else math.log(p.eps) for p in branch.points])
    da = np.diff(a)
    folds = []
    for k in range(1, len(a) - 1):
        if da[k - 1] == 0.0 or da[k] == 0.0 or np.sign(da[k - 1]) == np.sign(da[k]):
            continue
        if len(branch.profiles) != len(branch.points):
            # no profiles: report the sampled turning point
            p = branch.points[k]
            folds.append(FoldPoint(k, branch.active, float(a[k]) if branch.active == "mu" else p.eps, p.P, math.nan, None))
            continue
        try:
            folds.append(_localize_fold(branch, k, tol, max_iter, newton_tol))
        except SolverError as exc:
            log.warning("fold near point %d not localized: %s", k, exc)
    return folds


def _localize_fold(branch, k, tol, max_iter, newton_tol):
    active = branch.active
    mesh = branch.profiles[k].mesh
    A = _extended(branch.profiles[k - 1].remesh(mesh), active)
    B = _extended(branch.profiles[k + 1].remesh(mesh), active)
    kw = _system_kw(branch)
    Wt = arclength_weights(mesh)
    UA, UB = A.to_vector(), B.to_vector()
    chord = UB - UA
    length = _wnorm(chord, Wt)
    c = chord / length

    def point(s, guess):
        U_pred = UA + s * c
        system = PeriodicSystem(reference=guess, arclength=(U_pred, c, Wt), **kw)
        sol = bvp.newton_solve(system.problem, guess.with_vector(U_pred), tol=newton_tol, max_iter=20)
        tau = branch_tangent(sol, kw, direction=c)[-1]
        return sol, float(tau)

    sA, tA = point(0.0, A)
    sB, tB = point(length, B)
    lo, hi = 0.0, length
    best = (abs(tA), sA, tA)
    if abs(tB) < best[0]:
        best = (abs(tB), sB, tB)
    side = 0
    it = 0
    if np.sign(tA) == np.sign(tB):
        raise SolverError("tangent does not change sign across the fold bracket")
    while best[0] >= tol and it < max_iter:
        s = (lo * tB - hi * tA) / (tB - tA)
        if not (lo < s < hi):
            s = 0.5 * (lo + hi)
        guess = sA if (s - lo) < (hi - s) else sB
        sol, t = point(s, guess)
        it += 1
        if abs(t) < best[0]:
            best = (abs(t), sol, t)
        if np.sign(t) == np.sign(tA):
            lo, tA, sA = s, t, sol
            if side == -1:
                tB *= 0.5
            side = -1
        else:
            hi, tB, sB = s, t, sol
            if side == 1:
                tA *= 0.5
            side = 1
        if hi - lo < 1e-15 * length:
            break
    sol, tau = best[1], best[2]
    prof = _profile_from(sol, active, branch.fixed_value)
    value = prof.params.mu if active == "mu" else prof.params.epsilon
    return FoldPoint(k, active, value, prof.P, tau, prof, it)


def leftmost_fold_stop(profile: OrbitProfile, branch: Branch):
    """Stop callback: end a decreasing-mu run just after its first turning point."""
    pts = branch.points
    if len(pts) >= 3 and pts[-2].fold:
        return "fold passed"
    return None


@dataclass
class FoldTraceRow:
    eps: float
    mu_star: float
    P_star: float
    ok: bool
    note: str = ""


def trace_fold_in_eps(
    eps_grid,
    base: OrbitProfile | None = None,
    mu_start: float = 0.0,
    step: StepConfig | None = None,
) -> list:
    """Leftmost fold ``(mu*, P*)`` of the main family for each epsilon in ``eps_grid``.

    From ``base`` (default: the seed orbit at eps = 1e-3) the family is moved
    to ``mu_start``, continued in epsilon to each grid value, then continued
    in decreasing mu until the first fold, which is localized.  Failures are
    recorded as gaps.
    """
    from .seed import build_seed_orbit

    eps_grid = [float(e) for e in eps_grid]
    if not eps_grid:
        return []
    lo, hi = 1e-5, 1e-1
    for e in eps_grid:
        if not (lo * (1 - 1e-12) <= e <= hi * (1 + 1e-12)):
            raise DomainError(f"grid value {e} outside [{lo}, {hi}]")
    if any(b > a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be descending")
    step = step or StepConfig()
    if base is None:
        base = build_seed_orbit(1e-3)
    if abs(base.params.mu - mu_start) > 0:
        hub = continue_branch(base, "mu", mu_start, step, keep_profiles=True)
        if hub.reason != "target reached":
            raise SolverError(f"could not move the base orbit to mu={mu_start}: {hub.reason}")
        base = hub.profiles[-1]
    rows = []
    for eps in eps_grid:
        try:
            if math.isclose(eps, base.params.epsilon, rel_tol=1e-12):
                start = base
            else:
                br = continue_branch(base, "epsilon", eps, step, keep_profiles=True)
                if br.reason != "target reached":
                    rows.append(FoldTraceRow(eps, math.nan, math.nan, False, f"epsilon run: {br.reason}"))
                    continue
                start = br.profiles[-1]
            down = continue_branch(start, "mu", model.MU_MIN, step, direction=-1, stop=leftmost_fold_stop)
            folds = detect_folds(down)
            if not folds:
                rows.append(FoldTraceRow(eps, math.nan, math.nan, False, f"no fold ({down.reason})"))
                continue
            f = folds[0]
            rows.append(FoldTraceRow(eps, f.value, f.P, True))
        except (SolverError, DomainError) as exc:
            rows.append(FoldTraceRow(eps, math.nan, math.nan, False, str(exc)))
    return rows
