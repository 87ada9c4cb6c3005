"""Gauss-Legendre collocation for two-point boundary-value problems.

Time is normalized to [0, 1].  On every mesh interval the solution is a
polynomial of degree ``m`` determined by its left node value ``y_j`` and its
values ``Y_ji`` at the ``m`` Gauss points (the implicit Runge-Kutta form of
Gauss collocation):

    Y_ji = y_j + h_j sum_k A_ik f(Y_jk),      y_{j+1} = y_j + h_j sum_k b_k f(Y_jk).

The unknown vector is ``[y (N+1, n), Y (N, m, n), p (q,)]`` where ``p`` holds
free scalars (period, unfolding, continuation parameter, ...).  Boundary,
integral and arclength conditions enter as dense border rows; the sparse
system is factorized directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SolverError

N_MIN = 10
N_MAX = 3200


@lru_cache(maxsize=None)
def gauss_tableau(m: int):
    """Gauss points ``c``, weights ``b``, RK matrix ``A`` on [0,1], plus helpers.

    Returns ``(c, b, A, Ainv, dm)`` where ``dm[k]`` is the (m-1)-th derivative
    of the k-th Lagrange basis polynomial on ``c`` (a constant).
    """
    if not 1 <= m <= 7:
        raise ValueError(f"collocation degree must be in [1, 7], got {m}")
    x, wts = np.polynomial.legendre.leggauss(m)
    c = 0.5 * (x + 1.0)
    b = 0.5 * wts
    A = np.empty((m, m))
    dm = np.empty(m)
    for k in range(m):
        others = np.delete(c, k)
        poly = np.polynomial.Polynomial.fromroots(others) / np.prod(c[k] - others)
        integ = poly.integ()
        A[:, k] = integ(c) - integ(0.0)
        dm[k] = math.factorial(m - 1) / np.prod(c[k] - others)
    return c, b, A, np.linalg.inv(A), dm


def _beta(m: int, s):
    """``beta_k(s) = int_0^s l_k``, shape ``s.shape + (m,)``."""
    c = gauss_tableau(m)[0]
    s = np.asarray(s, dtype=float)
    out = np.empty(s.shape + (m,))
    for k in range(m):
        others = np.delete(c, k)
        poly = np.polynomial.Polynomial.fromroots(others) / np.prod(c[k] - others)
        integ = poly.integ()
        out[..., k] = integ(s) - integ(0.0)
    return out


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    degree: int = 4

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size - 1 < N_MIN:
            raise AssemblyError(f"mesh needs at least {N_MIN} intervals")
        if not 2 <= self.degree <= 7:
            raise AssemblyError(f"collocation degree must be in [2, 7], got {self.degree}")
        if np.any(np.diff(nodes) <= 0.0):
            raise AssemblyError("mesh nodes must be strictly increasing")
        if abs(nodes[0]) > 1e-14 or abs(nodes[-1] - 1.0) > 1e-14:
            raise AssemblyError("mesh must span [0, 1]")

    @classmethod
    def uniform(cls, n_intervals: int, degree: int = 4) -> "Mesh":
        return cls(np.linspace(0.0, 1.0, n_intervals + 1), degree)

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    def stage_times(self) -> np.ndarray:
        c = gauss_tableau(self.degree)[0]
        return self.nodes[:-1, None] + self.h[:, None] * c[None, :]

    def quadrature_weights(self) -> np.ndarray:
        """Weights of the composite Gauss rule on the stage times, shape (N, m)."""
        b = gauss_tableau(self.degree)[1]
        return self.h[:, None] * b[None, :]


@dataclass
class BvpSolution:
    mesh: Mesh
    y: np.ndarray
    Y: np.ndarray
    p: np.ndarray
    residual: float = math.nan
    iterations: int = 0
    converged: bool = False

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))

    @classmethod
    def from_function(cls, mesh: Mesh, fn: Callable, p) -> "BvpSolution":
        """Sample ``fn(t) -> (len(t), n)`` at nodes and stage times."""
        y = np.asarray(fn(mesh.nodes), dtype=float)
        st = mesh.stage_times()
        Y = np.asarray(fn(st.ravel()), dtype=float).reshape(st.shape + (y.shape[1],))
        return cls(mesh, y, Y, p)

    @property
    def n(self) -> int:
        return self.y.shape[1]

    def stage_slopes(self) -> np.ndarray:
        """Derivatives at the stages implied by the node/stage values, (N, m, n)."""
        Ainv = gauss_tableau(self.mesh.degree)[3]
        D = self.Y - self.y[:-1, None, :]
        return np.einsum("ik,jkn->jin", Ainv, D) / self.mesh.h[:, None, None]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ts = np.atleast_1d(t)
        nodes = self.mesh.nodes
        j = np.clip(np.searchsorted(nodes, ts, side="right") - 1, 0, self.mesh.N - 1)
        h = self.mesh.h[j]
        s = (ts - nodes[j]) / h
        K = self.stage_slopes()[j]
        beta = _beta(self.mesh.degree, s)
        out = self.y[j] + h[:, None] * np.einsum("tk,tkn->tn", beta, K)
        return out[0] if t.ndim == 0 else out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.y.ravel(), self.Y.ravel(), self.p])

    def with_vector(self, vec) -> "BvpSolution":
        N, m, n = self.mesh.N, self.mesh.degree, self.n
        ny, nY = (N + 1) * n, N * m * n
        return BvpSolution(
            self.mesh,
            vec[:ny].reshape(N + 1, n),
            vec[ny : ny + nY].reshape(N, m, n),
            vec[ny + nY :].copy(),
        )

    def remesh(self, mesh: Mesh) -> "BvpSolution":
        """Interpolate onto another mesh (same scalars)."""
        out = BvpSolution.from_function(mesh, self, self.p.copy())
        return out


@dataclass
class Conditions:
    """Border rows: residual ``r`` and its derivatives w.r.t. y, Y and p."""

    r: np.ndarray
    dy: np.ndarray
    dY: np.ndarray
    dp: np.ndarray


@dataclass
class BvpProblem:
    """``y' = f(t, y, p)`` on [0, 1] plus ``n + n_params`` border conditions.

    ``f(t, Y, p)`` is vectorized: ``t`` of shape (K,), ``Y`` of shape (K, n).
    ``f_jac`` (optional) returns ``(df/dy (K, n, n), df/dp (K, n, q))``;
    without it a finite-difference Jacobian is used.
    ``conditions(sol)`` returns a :class:`Conditions` with
    ``n + n_params`` rows.
    """

    n: int
    n_params: int
    f: Callable
    conditions: Callable
    f_jac: Callable | None = None

    def jacobian(self, t, Y, p):
        if self.f_jac is not None:
            return self.f_jac(t, Y, p)
        return fd_jacobian(self.f, t, Y, p)


def fd_jacobian(f, t, Y, p, rel=1e-7):
    f0 = f(t, Y, p)
    K, n = Y.shape
    q = p.size
    J = np.empty((K, n, n))
    Jp = np.empty((K, n, q))
    for a in range(n):
        d = rel * (1.0 + np.abs(Y[:, a]))
        Yp = Y.copy()
        Yp[:, a] += d
        J[:, :, a] = (f(t, Yp, p) - f0) / d[:, None]
    for l in range(q):
        d = rel * (1.0 + abs(p[l]))
        pp = p.copy()
        pp[l] += d
        Jp[:, :, l] = (f(t, Y, pp) - f0) / d
    return J, Jp


def boundary_conditions(bc: Callable, n_rows: int, bc_jac: Callable | None = None) -> Callable:
    """Adapt ``bc(ya, yb, p) -> (n_rows,)`` to the border-row interface."""

    def conditions(sol: BvpSolution) -> Conditions:
        ya, yb, p = sol.y[0], sol.y[-1], sol.p
        r = np.asarray(bc(ya, yb, p), dtype=float)
        if bc_jac is not None:
            da, db, dp = bc_jac(ya, yb, p)
        else:
            da, db, dp = _fd_bc(bc, ya, yb, p, r)
        N, m, n = sol.mesh.N, sol.mesh.degree, sol.n
        dy = np.zeros((n_rows, N + 1, n))
        dy[:, 0, :] = da
        dy[:, -1, :] += db
        return Conditions(r, dy, np.zeros((n_rows, N, m, n)), np.asarray(dp).reshape(n_rows, -1))

    return conditions


def _fd_bc(bc, ya, yb, p, r0, rel=1e-7):
    n, q = ya.size, p.size
    da = np.empty((r0.size, n))
    db = np.empty((r0.size, n))
    dp = np.empty((r0.size, q))
    for a in range(n):
        d = rel * (1 + abs(ya[a]))
        e = np.zeros(n)
        e[a] = d
        da[:, a] = (np.asarray(bc(ya + e, yb, p)) - r0) / d
        d = rel * (1 + abs(yb[a]))
        e = np.zeros(n)
        e[a] = d
        db[:, a] = (np.asarray(bc(ya, yb + e, p)) - r0) / d
    for l in range(q):
        d = rel * (1 + abs(p[l]))
        e = np.zeros(q)
        e[l] = d
        dp[:, l] = (np.asarray(bc(ya, yb, p + e)) - r0) / d
    return da, db, dp


# ---------------------------------------------------------------------------
# assembly


@lru_cache(maxsize=32)
def _pattern(N: int, m: int, n: int, q: int):
    """Row/column index arrays of the sparse (non-border) part."""
    ny, nY = (N + 1) * n, N * m * n
    j = np.arange(N)[:, None, None, None, None]
    i = np.arange(m)[None, :, None, None, None]
    a = np.arange(n)[None, None, :, None, None]
    k = np.arange(m)[None, None, None, :, None]
    bb = np.arange(n)[None, None, None, None, :]
    shape = (N, m, n, m, n)
    # stage rows vs stage columns
    rYY = np.broadcast_to((j * m + i) * n + a, shape).ravel()
    cYY = np.broadcast_to(ny + (j * m + k) * n + bb, shape).ravel()
    # stage rows vs y_j
    j3 = np.arange(N)[:, None, None]
    i3 = np.arange(m)[None, :, None]
    a3 = np.arange(n)[None, None, :]
    rYy = ((j3 * m + i3) * n + a3).ravel()
    cYy = np.broadcast_to(j3 * n + a3, (N, m, n)).ravel()
    # continuity rows
    j2 = np.arange(N)[:, None]
    a2 = np.arange(n)[None, :]
    rC = (nY + j2 * n + a2).ravel()
    cC0 = (j2 * n + a2).ravel()
    cC1 = ((j2 + 1) * n + a2).ravel()
    jc = np.arange(N)[:, None, None, None]
    ac = np.arange(n)[None, :, None, None]
    kc = np.arange(m)[None, None, :, None]
    bc_ = np.arange(n)[None, None, None, :]
    sc = (N, n, m, n)
    rCY = np.broadcast_to(nY + jc * n + ac, sc).ravel()
    cCY = np.broadcast_to(ny + (jc * m + kc) * n + bc_, sc).ravel()
    # parameter columns for all non-border rows
    nrow = nY + N * n
    rP = np.repeat(np.arange(nrow), q)
    cP = np.tile(ny + nY + np.arange(q), nrow)
    return rYY, cYY, rYy, cYy, rC, cC0, cC1, rCY, cCY, rP, cP


def assemble(problem: BvpProblem, sol: BvpSolution, jacobian: bool = True):
    """Residual vector and (optionally) sparse Jacobian at ``sol``."""
    mesh = sol.mesh
    N, m, n, q = mesh.N, mesh.degree, problem.n, problem.n_params
    if sol.y.shape != (N + 1, n) or sol.Y.shape != (N, m, n) or sol.p.shape != (q,):
        raise AssemblyError(
            f"guess shapes y{sol.y.shape} Y{sol.Y.shape} p{sol.p.shape} do not match "
            f"mesh N={N}, m={m}, n={n}, q={q}"
        )
    c, b, A, _, _ = gauss_tableau(m)
    h = mesh.h
    t = mesh.stage_times().ravel()
    Yf = sol.Y.reshape(-1, n)
    F = np.asarray(problem.f(t, Yf, sol.p), dtype=float).reshape(N, m, n)
    hF = h[:, None, None] * F
    R_stage = sol.Y - sol.y[:-1, None, :] - np.einsum("ik,jkn->jin", A, hF)
    R_cont = sol.y[1:] - sol.y[:-1] - np.einsum("k,jkn->jn", b, hF)
    cond = problem.conditions(sol)
    if cond.r.size != n + q:
        raise AssemblyError(f"expected {n + q} border conditions, got {cond.r.size}")
    R = np.concatenate([R_stage.ravel(), R_cont.ravel(), cond.r])
    if not jacobian:
        return R, None

    J, Jp = problem.jacobian(t, Yf, sol.p)
    J = np.asarray(J).reshape(N, m, n, n)
    Jp = np.asarray(Jp).reshape(N, m, n, q)
    rYY, cYY, rYy, cYy, rC, cC0, cC1, rCY, cCY, rP, cP = _pattern(N, m, n, q)
    eye = np.eye(m)[None, :, None, :, None] * np.eye(n)[None, None, :, None, :]
    vYY = eye - h[:, None, None, None, None] * A[None, :, None, :, None] * J.transpose(0, 2, 1, 3)[:, None, :, :, :]
    vYy = -np.ones(N * m * n)
    vCY = -(h[:, None, None, None] * b[None, None, :, None]) * J.transpose(0, 2, 1, 3)
    hJp = h[:, None, None, None] * Jp
    vPs = -np.einsum("ik,jknl->jinl", A, hJp).reshape(N * m * n, q)
    vPc = -np.einsum("k,jknl->jnl", b, hJp).reshape(N * n, q)
    vP = np.concatenate([vPs, vPc]).ravel()

    nrow_sparse = N * m * n + N * n
    border = np.concatenate(
        [cond.dy.reshape(n + q, -1), cond.dY.reshape(n + q, -1), cond.dp.reshape(n + q, q)], axis=1
    )
    br, bcix = np.nonzero(border)
    rows = np.concatenate([rYY, rYy, rC, rC, rCY, rP, nrow_sparse + br])
    cols = np.concatenate([cYY, cYy, cC0, cC1, cCY, cP, bcix])
    vals = np.concatenate(
        [
            vYY.ravel(),
            vYy,
            -np.ones(N * n),
            np.ones(N * n),
            vCY.ravel(),
            vP,
            border[br, bcix],
        ]
    )
    size = R.size
    Jac = sp.csc_matrix((vals, (rows, cols)), shape=(size, size))
    return R, Jac


def factorize(Jac):
    try:
        return spla.splu(Jac, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"singular linearization: {exc}", condition=math.inf) from exc


def newton_solve(
    problem: BvpProblem,
    guess: BvpSolution,
    tol: float = 1e-10,
    max_iter: int = 30,
    min_damping: float = 2.0**-10,
) -> BvpSolution:
    """Damped Newton iteration on the collocation equations."""
    sol = BvpSolution(guess.mesh, guess.y.copy(), guess.Y.copy(), guess.p.copy())
    R, Jac = assemble(problem, sol)
    rnorm = float(np.max(np.abs(R)))
    best = (rnorm, sol)
    it = 0
    while rnorm > tol:
        if it >= max_iter:
            raise SolverError(
                f"Newton did not converge in {max_iter} iterations (residual {rnorm:.3e})",
                best=_finish(best[1], best[0], it, False),
            )
        if not np.isfinite(rnorm):
            raise SolverError("non-finite residual", best=_finish(best[1], best[0], it, False))
        lu = factorize(Jac)
        delta = lu.solve(-R)
        if not np.all(np.isfinite(delta)):
            raise SolverError("singular linearization (non-finite Newton step)", best=best[1], condition=math.inf)
        x0 = sol.to_vector()
        alpha = 1.0
        while True:
            trial = sol.with_vector(x0 + alpha * delta)
            R_trial, _ = assemble(problem, trial, jacobian=False)
            r_trial = float(np.max(np.abs(R_trial)))
            if np.isfinite(r_trial) and (r_trial < rnorm or alpha <= min_damping):
                break
            alpha *= 0.5
        it += 1
        sol = trial
        rnorm = r_trial
        if rnorm < best[0]:
            best = (rnorm, sol)
        if rnorm > tol:
            R, Jac = assemble(problem, sol)
        if alpha <= min_damping and r_trial >= best[0] and rnorm > tol:
            raise SolverError(
                f"Newton stalled at minimum damping (residual {rnorm:.3e})",
                best=_finish(best[1], best[0], it, False),
            )
    return _finish(sol, rnorm, it, True)


def _finish(sol, rnorm, it, ok):
    sol.residual = rnorm
    sol.iterations = it
    sol.converged = ok
    return sol


def jacobian_check(problem: BvpProblem, sol: BvpSolution, rel=1e-7) -> float:
    """Max relative difference between assembled and finite-difference Jacobians.

    Dense, so meant for small meshes.
    """
    R0, Jac = assemble(problem, sol)
    Jd = Jac.toarray()
    x0 = sol.to_vector()
    Jfd = np.empty_like(Jd)
    for col in range(x0.size):
        d = rel * (1.0 + abs(x0[col]))
        x = x0.copy()
        x[col] += d
        R1, _ = assemble(problem, sol.with_vector(x), jacobian=False)
        Jfd[:, col] = (R1 - R0) / d
    scale = max(np.max(np.abs(Jd)), 1.0)
    return float(np.max(np.abs(Jd - Jfd)) / scale)


# ---------------------------------------------------------------------------
# mesh adaptation


def _mth_derivative(sol: BvpSolution) -> np.ndarray:
    """Constant m-th derivative of the collocation polynomial per interval, (N, n)."""
    m = sol.mesh.degree
    dm = gauss_tableau(m)[4]
    K = sol.stage_slopes()
    h = sol.mesh.h
    return np.einsum("k,jkn->jn", dm, K) / h[:, None] ** (m - 1)


def error_indicators(sol: BvpSolution, periodic: bool = False):
    """Per-interval estimate of |y^(m+1)| and of the local error h^(m+1)|y^(m+1)|."""
    m = sol.mesh.degree
    D = _mth_derivative(sol)
    h = sol.mesh.h
    N = h.size
    if periodic:
        Dn = np.roll(D, -1, axis=0)
        hn = np.roll(h, -1)
    else:
        Dn = np.vstack([D[1:], D[-1:]])
        hn = np.concatenate([h[1:], h[-1:]])
    fwd = np.max(np.abs(Dn - D), axis=1) / (0.5 * (h + hn))
    if not periodic:
        fwd[-1] = fwd[-2] if N > 1 else 0.0
    bwd = np.roll(fwd, 1)
    if not periodic:
        bwd[0] = fwd[0]
    d = np.maximum(fwd, bwd)
    return d, h ** (m + 1) * d


def adapt_mesh(
    sol: BvpSolution,
    n_max: int = N_MAX,
    periodic: bool = False,
    floor: float = 0.05,
    tol: float | None = None,
    n_min: int | None = None,
) -> Mesh:
    """Equidistribute ``|y^(m+1)|^(1/(m+1))`` over a mesh of (possibly doubled) size.

    ``floor`` reserves roughly that fraction of the nodes for a uniform
    background so smooth stretches never lose all their nodes.  With an
    absolute ``tol`` and ``n_min`` the mesh is also halved when the largest
    indicator is far below ``tol``.
    """
    mesh = sol.mesh
    m = mesh.degree
    d, err = error_indicators(sol, periodic)
    if not np.all(np.isfinite(d)) or np.max(d) <= 1e-12:
        return mesh
    # estimates at round-off level carry no information
    if np.max(err) <= 1e-12 * (1.0 + float(np.max(np.abs(sol.y)))):
        return mesh
    N = mesh.N
    med = float(np.median(err))
    grow = np.max(err) > tol if tol is not None else np.max(err) > 10.0 * med
    N_new = min(2 * N, n_max) if grow else N
    # halving N scales the indicator by about 2^(m+1); keep a factor 2 of hysteresis
    if not grow and tol is not None and n_min is not None and N // 2 >= n_min:
        if np.max(err) * 2.0 ** (m + 2) < tol:
            N_new = N // 2
    omega = d ** (1.0 / (m + 1))
    # light smoothing against abrupt ratio jumps between neighbors
    if periodic:
        omega = np.maximum(omega, 0.5 * (np.roll(omega, 1) + np.roll(omega, -1)))
    else:
        sm = omega.copy()
        sm[1:-1] = np.maximum(omega[1:-1], 0.5 * (omega[:-2] + omega[2:]))
        omega = sm
    h = mesh.h
    total = float(np.sum(omega * h))
    omega = omega + floor * total
    cum = np.concatenate([[0.0], np.cumsum(omega * h)])
    targets = np.linspace(0.0, cum[-1], N_new + 1)
    nodes = np.interp(targets, cum, mesh.nodes)
    nodes[0], nodes[-1] = 0.0, 1.0
    if N_new == N and np.max(np.abs(nodes - mesh.nodes)) <= 1e-12:
        return mesh
    return Mesh(nodes, m)
