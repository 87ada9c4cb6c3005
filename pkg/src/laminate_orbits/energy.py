"""Energy of laminate profiles along orbit families and the period scaling law."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as quad_integrate
from scipy.optimize import brentq

from . import model
from .continuation import (
    Branch,
    OrbitProfile,
    StepConfig,
    continue_branch,
    leftmost_fold_stop,
)
from .errors import DomainError, SolverError

log = logging.getLogger(__name__)


def well_potential(w):
    return 0.25 * (np.asarray(w, dtype=float) ** 2 - 1.0) ** 2


def functional_density(profile: OrbitProfile) -> float:
    """Average of ``z^2 + W(w) + u^2`` over one period.

    ``z`` equals ``eps * w_X``, which is ``eps * u_XX``, so ``z^2`` is the
    curvature term.  On normalized time the average is a plain integral over
    [0, 1], evaluated with the Gauss weights of the collocation mesh.
    """
    Y = profile.sol.Y
    dens = Y[..., 3] ** 2 + well_potential(Y[..., 2]) + Y[..., 0] ** 2
    return float(np.sum(profile.mesh.quadrature_weights() * dens))


def jump_energy_constant() -> float:
    """``A0 = 2 * int_{-1}^{1} sqrt(W(w)) dw`` by adaptive quadrature (exactly 4/3)."""
    val, _ = quad_integrate.quad(lambda w: math.sqrt(0.25 * (w * w - 1.0) ** 2), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * val


def mueller_period(epsilon: float) -> float:
    """Leading-order minimizing period ``2 (6 A0 eps)^(1/3)``."""
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    return 2.0 * (6.0 * jump_energy_constant() * epsilon) ** (1.0 / 3.0)


@dataclass
class EnergyScan:
    epsilon: float
    rows: list
    P_min: float
    I_min: float
    boundary: bool
    curvature: float = math.nan
    bracket: tuple = ()
    mu_rows: list = field(default_factory=list)

    def to_rows(self) -> list:
        return [{"P": P, "I": I} for P, I in self.rows]


def scan_samples(epsilon: float, P, I, mu=None) -> EnergyScan:
    """Locate the minimum of sampled ``I(P)``.

    The minimum sample and its two neighbors in ``P`` order define a
    parabola whose vertex is returned; a minimum at either end of the samples
    is flagged as a boundary minimum without interpolation.
    """
    P = np.asarray(P, dtype=float)
    I = np.asarray(I, dtype=float)
    if P.size == 0 or P.size != I.size:
        raise ValueError("need matching, non-empty P and I samples")
    if not np.all(np.isfinite(I)):
        raise ValueError("energy samples must be finite")
    order = np.argsort(P, kind="stable")
    P, I = P[order], I[order]
    mu_rows = list(np.asarray(mu)[order]) if mu is not None else []
    rows = list(zip(P.tolist(), I.tolist()))
    k = int(np.argmin(I))
    if k == 0 or k == P.size - 1:
        return EnergyScan(epsilon, rows, float(P[k]), float(I[k]), True, mu_rows=mu_rows)
    x0, x1, x2 = P[k - 1 : k + 2]
    y0, y1, y2 = I[k - 1 : k + 2]
    # vertex of the interpolating parabola (divided differences)
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    c2 = (d12 - d01) / (x2 - x0)
    if c2 <= 0.0:
        return EnergyScan(epsilon, rows, float(x1), float(y1), True, mu_rows=mu_rows)
    xv = 0.5 * (x0 + x1) - d01 / (2.0 * c2)
    xv = min(max(xv, x0), x2)
    yv = y0 + d01 * (xv - x0) + c2 * (xv - x0) * (xv - x1)
    return EnergyScan(epsilon, rows, float(xv), float(yv), False, float(2.0 * c2), (float(x0), float(x2)), mu_rows)


def scan_branch(branch: Branch) -> EnergyScan:
    """Energy along a branch whose points carry full profiles."""
    if len(branch.profiles) != len(branch.points) or not branch.profiles:
        raise ValueError("branch points must carry profiles for an energy scan")
    P = [pr.P for pr in branch.profiles]
    I = [functional_density(pr) for pr in branch.profiles]
    mu = [pr.params.mu for pr in branch.profiles]
    for pt, val in zip(branch.points, I):
        pt.energy = val
    eps = branch.profiles[0].params.epsilon
    return scan_samples(eps, P, I, mu)


def scaling_fit(table) -> tuple:
    """Least-squares line through ``(ln eps, ln P)``; returns ``(alpha, C, max residual)``."""
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
        raise ValueError("need at least 4 rows of (epsilon, P)")
    if np.any(arr <= 0.0):
        raise DomainError("scaling fit needs positive epsilon and P")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    A = np.vstack([x, np.ones_like(x)]).T
    (alpha, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.max(np.abs(A @ np.array([alpha, c]) - y)))
    return float(alpha), float(math.exp(c)), res


# ---------------------------------------------------------------------------
# sampling the main family near the energy minimum


def mu_for_singular_period(P: float) -> float:
    """Level whose singular orbit has period ``P`` (inverse of the monotone map)."""
    lo, hi = model.MU_MIN + 1e-14, model.MU_MAX - 1e-14
    f = lambda m: model.singular_period(m) - P  # noqa: E731
    if f(lo) >= 0.0:
        return lo
    if f(hi) <= 0.0:
        return hi
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)


def sample_family(
    anchor: OrbitProfile,
    mu_values,
    step: StepConfig | None = None,
) -> list:
    """Land on each level in ``mu_values`` (visited in the given order) along the family.

    Sampling stops at the first level that cannot be reached, e.g. because
    the family turns at a fold first.
    """
    step = step or StepConfig()
    out = []
    cur = anchor
    for mu in mu_values:
        if math.isclose(mu, cur.params.mu, rel_tol=0.0, abs_tol=1e-15):
            out.append(cur)
            continue
        br = continue_branch(cur, "mu", mu, step, stop=leftmost_fold_stop)
        if br.reason != "target reached":
            log.info("sampling stopped before mu=%.6g: %s", mu, br.reason)
            break
        cur = br.profiles[-1]
        out.append(cur)
    return out


def energy_minimum(
    anchor: OrbitProfile,
    n_samples: int = 15,
    span: tuple = (0.5, 2.0),
    step: StepConfig | None = None,
) -> EnergyScan:
    """Sample the family around the leading-order minimizer and locate the minimum of I(P).

    Levels are chosen so that the singular periods are geometrically spaced
    over ``span`` times the leading-order minimizing period, and are visited
    from the top down.  When the first pass finds a boundary minimum the
    window is shifted once toward it.
    """
    eps = anchor.params.epsilon
    P_ref = mueller_period(eps)
    scan = None
    for _ in range(3):
        Ps = P_ref * np.geomspace(span[1], span[0], n_samples)
        mus = [mu_for_singular_period(p) for p in Ps]
        mus = sorted(set(mus), reverse=True)
        start = anchor
        if mus[0] > anchor.params.mu:
            br = continue_branch(anchor, "mu", mus[0], step, stop=leftmost_fold_stop)
            if br.reason != "target reached":
                raise SolverError(f"could not reach the top of the sampling window: {br.reason}")
            start = br.profiles[-1]
        profiles = sample_family(start, mus, step)
        if len(profiles) < 3:
            raise SolverError("fewer than three energy samples")
        P = [p.P for p in profiles]
        I = [functional_density(p) for p in profiles]
        scan = scan_samples(eps, P, I, [p.params.mu for p in profiles])
        if not scan.boundary:
            return scan
        ratio = span[1] / span[0]
        # shift the window toward the boundary minimum
        if scan.P_min >= max(P) * (1 - 1e-12):
            span = (span[1] / math.sqrt(ratio), span[1] * math.sqrt(ratio))
        else:
            span = (span[0] / math.sqrt(ratio), span[0] * math.sqrt(ratio))
        anchor = profiles[0]
    return scan


@dataclass
class ScalingRow:
    eps: float
    P_min: float
    P_mueller: float
    ok: bool
    boundary: bool = False
    note: str = ""
    scan: EnergyScan | None = field(default=None, repr=False)

    @property
    def ratio(self) -> float:
        return self.P_min / self.P_mueller


def _window_top(eps: float, span_hi: float) -> float:
    return min(mu_for_singular_period(span_hi * mueller_period(eps)), model.MU_MAX - 1e-3)


def period_scaling(
    eps_grid,
    base: OrbitProfile | None = None,
    step: StepConfig | None = None,
    n_samples: int = 15,
    span: tuple = (0.5, 2.0),
) -> list:
    """Energy-minimizing period for each epsilon in ``eps_grid``.

    Epsilons are processed from the base value outward (homotopy in
    epsilon, never seeding below the base).  For each one the family is
    moved to the top of the sampling window and continued in epsilon at that
    level, then sampled in mu.  Rows come back in grid order; failures are
    recorded rather than raised.
    """
    from .seed import build_seed_orbit

    grid = [float(e) for e in eps_grid]
    if not grid:
        return []
    step = step or StepConfig()
    if base is None:
        base = build_seed_orbit(1e-3)
    e0 = base.params.epsilon
    below = sorted([e for e in grid if e <= e0], reverse=True)
    above = sorted([e for e in grid if e > e0])
    results = {}
    for chain in (below, above):
        cur = base
        for eps in chain:
            try:
                mu_top = _window_top(eps, span[1])
                # move in mu at the current epsilon, then in epsilon at the new level
                if not math.isclose(cur.params.mu, mu_top, abs_tol=1e-15):
                    br = continue_branch(cur, "mu", mu_top, step, stop=leftmost_fold_stop)
                    if br.reason != "target reached":
                        raise SolverError(f"mu run to {mu_top:.6g} ended: {br.reason}")
                    cur = br.profiles[-1]
                if not math.isclose(cur.params.epsilon, eps, rel_tol=1e-12):
                    br = continue_branch(cur, "epsilon", eps, step)
                    if br.reason != "target reached":
                        raise SolverError(f"epsilon run to {eps:.3g} ended: {br.reason}")
                    cur = br.profiles[-1]
                scan = energy_minimum(cur, n_samples=n_samples, span=span, step=step)
                results[eps] = ScalingRow(eps, scan.P_min, mueller_period(eps), True, scan.boundary, scan=scan)
            except SolverError as exc:
                log.warning("scaling point eps=%.3g failed: %s", eps, exc)
                results[eps] = ScalingRow(eps, math.nan, mueller_period(eps), False, note=str(exc))
    return [results[e] for e in grid]
