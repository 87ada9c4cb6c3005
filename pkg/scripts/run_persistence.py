"""Distance of the main family to the singular orbit as eps -> 0 at a fixed level."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from _common import config_tag, main_family_orbit, parse_config

from laminate_orbits import model, persist
from laminate_orbits.continuation import continue_branch


@dataclass
class PersistenceConfig:
    mu: float = 0.0
    eps: tuple = (1e-3, 5e-4, 2.5e-4, 1.25e-4)
    out: str = "results/persistence"


def main() -> None:
    cfg, out = parse_config(PersistenceConfig, __doc__)
    T0 = model.singular_period(cfg.mu)
    r = model.jump_points(cfg.mu)[0]
    orbit = main_family_orbit(cfg.mu, cfg.eps[0])
    t = np.linspace(0.0, 1.0, 100_001)
    rows = []
    for e in cfg.eps:
        if e != orbit.params.epsilon:
            orbit = continue_branch(orbit, "epsilon", e).profiles[-1]
        rows.append([e, orbit.P, abs(orbit.P - T0), abs(np.max(orbit(t)[:, 0]) - r)])
    persist.write_csv(out / "persistence.csv", ["eps", "P", "period_gap", "takeoff_shift"], rows, comments=config_tag(cfg))
    for a, b in zip(rows, rows[1:]):
        q = math.log(a[0] / b[0])
        print(f"eps {a[0]:g} -> {b[0]:g}: period order {math.log(a[2] / b[2]) / q:.3f}, take-off order {math.log(a[3] / b[3]) / q:.3f}")


if __name__ == "__main__":
    main()
