"""eps-continuation at the three preset levels, through the fold and back down."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from _common import config_tag, main_family_orbit, parse_config, save_branch

from laminate_orbits import model, persist
from laminate_orbits.cli import PRESETS
from laminate_orbits.continuation import continue_branch, detect_folds, leftmost_fold_stop


@dataclass
class PresetConfig:
    presets: tuple = ("mu_l", "mu_c", "mu_r")
    eps_ceiling: float = 1.0
    eps_floor: float = 1e-5
    out: str = "results/eps_presets"


def slope(points, lo, hi):
    pts = np.array([(p.eps, p.P) for p in points if lo <= p.eps <= hi])
    if len(pts) < 2:
        return float("nan")
    return float(np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)[0])


def main() -> None:
    cfg, out = parse_config(PresetConfig, __doc__)
    rows = []
    for name in cfg.presets:
        mu = PRESETS[name]
        start = main_family_orbit(mu)
        up = continue_branch(start, "epsilon", cfg.eps_ceiling, param_range=(1e-7, cfg.eps_ceiling), stop=leftmost_fold_stop)
        folds = detect_folds(up)
        save_branch(out / f"{name}_up.csv", up, cfg)
        lower = continue_branch(start, "epsilon", cfg.eps_floor)
        save_branch(out / f"{name}_lower.csv", lower, cfg)
        if folds and folds[0].value <= 0.1:
            upper = continue_branch(up.profiles[-1], "epsilon", cfg.eps_floor)
            save_branch(out / f"{name}_upper.csv", upper, cfg)
            s_up = slope(upper.points, cfg.eps_floor, 1e-3)
        else:
            s_up = float("nan")
        s_lo = slope(lower.points, cfg.eps_floor, 1e-3)
        f = folds[0] if folds else None
        rows.append([name, mu, f.value if f else float("nan"), f.P if f else float("nan"), s_lo, s_up, model.singular_period(mu)])
        print(f"{name}: fold eps={rows[-1][2]:.6g} P={rows[-1][3]:.6f}; slopes lower {s_lo:.3f} upper {s_up:.3f}")
    persist.write_csv(
        out / "summary.csv", ["preset", "mu", "eps_fold", "P_fold", "slope_lower", "slope_upper", "T0"], rows, comments=config_tag(cfg)
    )


if __name__ == "__main__":
    main()
