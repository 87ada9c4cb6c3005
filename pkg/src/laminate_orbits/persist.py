"""Lossless JSON/CSV persistence of orbits, branches and tables."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__, bvp, model
from .continuation import Branch, OrbitProfile


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def orbit_to_dict(profile: OrbitProfile, chash: str = "") -> dict:
    return {
        "meta": {
            "eps": profile.params.epsilon,
            "mu": profile.params.mu,
            "P": profile.P,
            "lambda": profile.lam,
            "residual": profile.residual,
            "config_hash": chash,
            "version": __version__,
            "degree": profile.mesh.degree,
        },
        "mesh": profile.mesh.nodes.tolist(),
        "states": profile.sol.y.tolist(),
        "stages": profile.sol.Y.reshape(-1, 4).tolist(),
    }


def orbit_from_dict(d: dict) -> OrbitProfile:
    meta = d["meta"]
    mesh = bvp.Mesh(np.asarray(d["mesh"], dtype=float), int(meta.get("degree", 4)))
    y = np.asarray(d["states"], dtype=float)
    if "stages" in d:
        Y = np.asarray(d["stages"], dtype=float).reshape(mesh.N, mesh.degree, 4)
        sol = bvp.BvpSolution(mesh, y, Y, np.array([meta["P"], meta["lambda"]]))
    else:
        nodes = mesh.nodes
        fn = lambda t: np.stack([np.interp(t, nodes, y[:, i]) for i in range(4)], axis=-1)  # noqa: E731
        sol = bvp.BvpSolution.from_function(mesh, fn, np.array([meta["P"], meta["lambda"]]))
    sol.residual = float(meta.get("residual", np.nan))
    return OrbitProfile(sol, model.ParamSet(float(meta["eps"]), float(meta["mu"])))


def write_json(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr-exact floats; json emits the shortest round-tripping form
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_orbit(path, profile: OrbitProfile, chash: str = "") -> None:
    write_json(path, orbit_to_dict(profile, chash))


def load_orbit(path) -> OrbitProfile:
    return orbit_from_dict(read_json(path))


def write_csv(path, header, rows, comments=()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v for v in r])


def read_csv(path) -> list:
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


BRANCH_COLUMNS = ("step", "mu", "eps", "P", "lambda", "norm", "fold_flag")


def branch_rows(branch: Branch) -> list:
    return [[p.as_row()[c] for c in BRANCH_COLUMNS] for p in branch.points]


def branch_to_dict(branch: Branch, folds=(), chash: str = "") -> dict:
    return {
        "meta": {
            "active": branch.active,
            "fixed_value": branch.fixed_value,
            "reason": branch.reason,
            "config_hash": chash,
            "version": __version__,
            "provenance": branch.provenance,
        },
        "points": [p.as_row() | {"tangent": p.tangent, "energy": p.energy} for p in branch.points],
        "folds": [
            {"index": f.index, "param": f.active, "value": f.value, "mu": f.mu, "eps": f.eps, "P": f.P, "tangent": f.tangent}
            for f in folds
            if f.profile is not None
        ],
    }
