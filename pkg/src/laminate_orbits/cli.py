"""Command-line front end.

Exit codes: 0 success (including truncated branches), 2 bad input or domain
error, 3 seed failure, 4 too many failed grid points in a scaling run.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, continuation, energy, model, persist, seed
from .errors import DomainError, LaminateError, SeedError, SolverError

log = logging.getLogger("laminate_orbits")

PRESETS = {
    "mu_l": -0.12489619925,
    "mu_c": 1.5378905702e-5,
    "mu_r": 0.04100005066,
}
EXIT_OK, EXIT_INPUT, EXIT_SEED, EXIT_GRID = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        p = self.params
        for key in ("tol", "ds", "ds_min", "ds_max", "mesh_tol"):
            if key in p and p[key] is not None and not p[key] > 0:
                raise UsageError(f"{key} must be positive")
        if p.get("mu") is not None and not (model.MU_MIN < p["mu"] < model.MU_MAX):
            raise DomainError(f"mu={p['mu']} outside (-1/8, 1/24)")
        if p.get("eps") is not None and not (1e-7 <= p["eps"] <= 1e-1):
            raise DomainError(f"eps={p['eps']} outside [1e-7, 1e-1]")

    @property
    def hash(self) -> str:
        return persist.config_hash(asdict(self))


def _step_config(p: dict) -> continuation.StepConfig:
    cfg = continuation.StepConfig()
    for key in ("ds", "ds_min", "ds_max", "max_steps", "mesh_tol"):
        if p.get(key) is not None:
            setattr(cfg, key, p[key])
    return cfg


def parse_grid(spec: str) -> list:
    """``a:b:k`` (k points per decade, both ends included) or a comma list."""
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid spec {spec!r} must be lo:hi:per_decade")
        lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
        if lo <= 0 or hi <= lo or k <= 0:
            raise UsageError(f"invalid grid spec {spec!r}")
        n = int(round(math.log10(hi / lo) * k))
        return [float(lo * 10 ** (i / k)) for i in range(n + 1)]
    return [float(x) for x in spec.split(",") if x.strip()]


# ---------------------------------------------------------------------------
# commands


def cmd_singular(cfg: RunConfig, out: Path) -> int:
    mu = cfg.params["mu"]
    orbit = model.singular_orbit(mu)
    data = orbit.to_dict() | {"config_hash": cfg.hash, "version": __version__}
    persist.write_json(out / "singular.json", data)
    rows = []
    for name in ("slow_arc_right", "jump_down", "slow_arc_left", "jump_up"):
        rows += [[name, *x] for x in getattr(orbit, name)]
    persist.write_csv(
        out / "singular.csv",
        ["piece", "u", "v", "w", "z"],
        rows,
        comments=[f"config_hash={cfg.hash}", f"version={__version__}", f"T0={persist.fmt(orbit.T0)}"],
    )
    print(f"T0 = {orbit.T0:.12g}  u_jump = {orbit.u_jump:.12g}")
    return EXIT_OK


def cmd_seed(cfg: RunConfig, out: Path) -> int:
    eps = cfg.params["eps"]
    try:
        prof = seed.build_seed_orbit(eps)
    except (SeedError, SolverError, ValueError) as exc:
        print(f"seed failed: {exc}", file=sys.stderr)
        if eps < seed.SEED_EPS_RANGE[0]:
            print("seed at 1e-3 and use `continue --param eps` to reach smaller epsilon", file=sys.stderr)
        return EXIT_SEED
    persist.save_orbit(out / "orbit.json", prof, cfg.hash)
    print(f"P = {prof.P:.12g}  mu = {prof.params.mu:.12g}  residual = {prof.residual:.3e}  lambda = {prof.lam:.3e}")
    return EXIT_OK


def _start_orbit(cfg: RunConfig, step) -> continuation.OrbitProfile:
    p = cfg.params
    if p.get("from"):
        path = Path(p["from"])
        if not path.is_file():
            raise UsageError(f"input orbit {path} not found")
        return persist.load_orbit(path)
    eps0 = p.get("seed_eps") or 1e-3
    prof = seed.build_seed_orbit(eps0)
    if p["param"] == "mu" and p.get("eps") is not None and p["eps"] != eps0:
        br = continuation.continue_branch(prof, "epsilon", p["eps"], step)
        if br.reason != "target reached":
            raise SolverError(f"could not reach eps={p['eps']}: {br.reason}")
        prof = br.profiles[-1]
    if p["param"] == "eps" and p.get("mu") is not None:
        direction = -1 if p["mu"] < prof.params.mu else 1
        br = continuation.continue_branch(prof, "mu", p["mu"], step, direction=direction)
        if br.reason != "target reached":
            raise SolverError(f"could not reach mu={p['mu']}: {br.reason}")
        prof = br.profiles[-1]
    return prof


def cmd_continue(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    step = _step_config(p)
    try:
        start = _start_orbit(cfg, step)
    except (SeedError, SolverError) as exc:
        print(f"seed failed: {exc}", file=sys.stderr)
        return EXIT_SEED
    active = "mu" if p["param"] == "mu" else "epsilon"
    direction = p.get("direction")
    br = continuation.continue_branch(start, active, p["to"], step, direction=direction)
    folds = continuation.detect_folds(br)
    persist.write_json(out / "branch.json", persist.branch_to_dict(br, folds, cfg.hash))
    persist.write_csv(
        out / "branch.csv",
        list(persist.BRANCH_COLUMNS),
        persist.branch_rows(br),
        comments=[f"config_hash={cfg.hash}", f"version={__version__}", f"reason={br.reason}"],
    )
    if br.profiles:
        persist.save_orbit(out / "last_orbit.json", br.profiles[-1], cfg.hash)
    print(f"{len(br.points)} points, stop: {br.reason}")
    for f in folds:
        print(f"fold: {f.active} = {f.value:.12g}  P = {f.P:.12g}")
    return EXIT_OK


def cmd_scaling(cfg: RunConfig, out: Path) -> int:
    grid = cfg.params["grid"]
    if not grid:
        raise UsageError("empty epsilon grid")
    step = _step_config(cfg.params)
    try:
        base = seed.build_seed_orbit(1e-3)
    except SeedError as exc:
        print(f"seed failed: {exc}", file=sys.stderr)
        return EXIT_SEED
    rows = energy.period_scaling(grid, base=base, step=step, n_samples=cfg.params.get("samples") or 15)
    persist.write_csv(
        out / "scaling.csv",
        ["eps", "P_min", "P_mueller", "ratio", "boundary_min"],
        [[r.eps, r.P_min, r.P_mueller, r.ratio, int(r.boundary)] for r in rows],
        comments=[f"config_hash={cfg.hash}", f"version={__version__}"],
    )
    for r in rows:
        if r.scan is not None:
            persist.write_csv(
                out / f"scan_eps_{r.eps:.6g}.csv",
                ["P", "I", "mu"],
                [[P, I, m] for (P, I), m in zip(r.scan.rows, r.scan.mu_rows)],
                comments=[f"config_hash={cfg.hash}", f"version={__version__}"],
            )
    good = [r for r in rows if r.ok]
    fit_rows = [(r.eps, r.P_min) for r in good if r.eps <= 1e-3]
    summary = {"config_hash": cfg.hash, "version": __version__, "n_ok": len(good), "n_grid": len(rows)}
    if len(fit_rows) >= 4:
        alpha, C, res = energy.scaling_fit(fit_rows)
        summary |= {"alpha": alpha, "C": C, "max_residual": res}
        print(f"alpha = {alpha:.6f}  C = {C:.6f}  (law: 1/3, {energy.mueller_period(1.0):.6f})")
    persist.write_json(out / "scaling_fit.json", summary)
    for r in rows:
        status = f"{r.P_min:.8g} ratio {r.ratio:.4f}" if r.ok else f"failed: {r.note}"
        print(f"eps {r.eps:.3g}: {status}")
    return EXIT_OK if len(good) >= 0.75 * len(rows) else EXIT_GRID


def cmd_folds(cfg: RunConfig, out: Path) -> int:
    grid = cfg.params["grid"]
    if not grid:
        raise UsageError("empty epsilon grid")
    step = _step_config(cfg.params)
    rows = continuation.trace_fold_in_eps(grid, step=step)
    persist.write_csv(
        out / "folds.csv",
        ["eps", "mu_star", "P_star", "ok"],
        [[r.eps, r.mu_star, r.P_star, int(r.ok)] for r in rows],
        comments=[f"config_hash={cfg.hash}", f"version={__version__}"],
    )
    for r in rows:
        print(f"eps {r.eps:.3g}: mu* = {r.mu_star:.12g}  P* = {r.P_star:.12g} {r.note}")
    return EXIT_OK


COMMANDS = {
    "singular": cmd_singular,
    "seed": cmd_seed,
    "continue": cmd_continue,
    "scaling": cmd_scaling,
    "folds": cmd_folds,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laminate-orbits", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="JSON file with default parameters for the command")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("singular", help="singular orbit and its slow period")
    s.add_argument("--mu", type=float)

    s = sub.add_parser("seed", help="first converged orbit near mu = -1/8")
    s.add_argument("--eps", type=float)

    s = sub.add_parser("continue", help="pseudo-arclength continuation in mu or eps")
    s.add_argument("--from", dest="from_", help="orbit JSON to start from (default: fresh seed)")
    s.add_argument("--param", choices=("mu", "eps"))
    s.add_argument("--to", help="target value, or a preset name (mu_l, mu_c, mu_r)")
    s.add_argument("--eps", type=float, help="fixed epsilon for mu runs")
    s.add_argument("--mu", help="fixed mu for eps runs (number or preset name)")
    s.add_argument("--direction", type=int, choices=(-1, 1))
    s.add_argument("--max-steps", type=int)
    s.add_argument("--ds-max", type=float)

    for name, helptext in (("scaling", "energy-minimizing period versus epsilon"), ("folds", "leftmost fold versus epsilon")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--grid", help="lo:hi:per_decade or comma list")
        s.add_argument("--max-steps", type=int)
        if name == "scaling":
            s.add_argument("--samples", type=int)
    return ap


def _number(x):
    if x is None or isinstance(x, (int, float)):
        return x
    if x in PRESETS:
        return PRESETS[x]
    return float(x)


def make_config(args: argparse.Namespace) -> RunConfig:
    params = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        params.update(json.loads(path.read_text()))
    for key, val in vars(args).items():
        if key in ("config", "out", "verbose", "command") or val is None:
            continue
        params[key.rstrip("_")] = val
    cmd = args.command
    if cmd == "singular":
        if params.get("mu") is None:
            raise UsageError("--mu is required")
        mu = float(params["mu"])
        if not (model.MU_MIN < mu < model.MU_MAX):
            raise DomainError(f"mu={mu} outside (-1/8, 1/24)")
        params["mu"] = mu
    elif cmd == "seed":
        if params.get("eps") is None:
            raise UsageError("--eps is required")
    elif cmd == "continue":
        if params.get("param") not in ("mu", "eps") or params.get("to") is None:
            raise UsageError("--param and --to are required")
        params["to"] = _number(params["to"])
        params["mu"] = _number(params.get("mu"))
        if params.get("from") and not Path(params["from"]).is_file():
            raise UsageError(f"input orbit {params['from']} not found")
        if params["param"] == "eps" and not (1e-7 <= params["to"] <= 1e-1):
            raise DomainError("eps target outside [1e-7, 1e-1]")
        if params["param"] == "mu" and not (model.MU_MIN < params["to"] < model.MU_MAX):
            raise DomainError("mu target outside (-1/8, 1/24)")
    elif cmd in ("scaling", "folds"):
        g = params.get("grid")
        params["grid"] = parse_grid(g) if isinstance(g, str) else [float(x) for x in (g or [])]
    cfg = RunConfig(cmd, params)
    if cmd != "continue":
        cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        return COMMANDS[cfg.command](cfg, Path(args.out))
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LaminateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEED if isinstance(exc, SeedError) else EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
