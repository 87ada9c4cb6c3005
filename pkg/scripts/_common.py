"""Shared helpers for the experiment scripts."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
from pathlib import Path

from laminate_orbits import __version__, persist
from laminate_orbits.continuation import OrbitProfile, continue_branch
from laminate_orbits.seed import build_seed_orbit


def parse_config(cls, description: str):
    """Build ``cls`` from its defaults, overridden by ``--set key=value`` pairs (JSON values)."""
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    kw = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for item in args.set:
        key, _, val = item.partition("=")
        if key not in names:
            ap.error(f"unknown config key {key!r}; choose from {sorted(names)}")
        kw[key] = json.loads(val)
    cfg = cls(**kw)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    persist.write_json(out / "config.json", dataclasses.asdict(cfg) | {"version": __version__})
    return cfg, out


def config_tag(cfg) -> list:
    return [f"config_hash={persist.config_hash(dataclasses.asdict(cfg))}", f"version={__version__}"]


def main_family_orbit(mu: float, eps: float = 1e-3) -> OrbitProfile:
    """Orbit of the main family at (eps, mu): seed at 1e-3, move in mu, then in eps."""
    orbit = build_seed_orbit(1e-3)
    if mu != orbit.params.mu:
        br = continue_branch(orbit, "mu", mu, direction=1 if mu > orbit.params.mu else -1)
        if br.reason != "target reached":
            raise RuntimeError(f"mu run ended early: {br.reason}")
        orbit = br.profiles[-1]
    if eps != orbit.params.epsilon:
        br = continue_branch(orbit, "epsilon", eps)
        if br.reason != "target reached":
            raise RuntimeError(f"eps run ended early: {br.reason}")
        orbit = br.profiles[-1]
    return orbit


def save_branch(path, branch, cfg) -> None:
    persist.write_csv(path, list(persist.BRANCH_COLUMNS), persist.branch_rows(branch), comments=config_tag(cfg) + [f"reason={branch.reason}"])
