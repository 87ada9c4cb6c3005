"""Main family at fixed eps: fold near mu = -1/8, the other branch, and the energy parabola."""
from __future__ import annotations

from dataclasses import dataclass

from _common import config_tag, parse_config, save_branch

from laminate_orbits import energy, model, persist
from laminate_orbits.continuation import continue_branch, detect_folds, leftmost_fold_stop
from laminate_orbits.seed import build_seed_orbit


@dataclass
class MuBranchConfig:
    mu_top: float = 0.0416
    lower_level: float = -0.124
    energy_samples: int = 15
    out: str = "results/mu_branch"


def main() -> None:
    cfg, out = parse_config(MuBranchConfig, __doc__)
    seed = build_seed_orbit(1e-3)
    persist.save_orbit(out / "seed.json", seed)

    up = continue_branch(seed, "mu", cfg.mu_top)
    save_branch(out / "main_up.csv", up, cfg)
    down = continue_branch(seed, "mu", model.MU_MIN, direction=-1, stop=leftmost_fold_stop)
    folds = detect_folds(down)
    back = continue_branch(down.profiles[-1], "mu", cfg.lower_level)
    save_branch(out / "fold_down.csv", down, cfg)
    save_branch(out / "other_branch.csv", back, cfg)
    persist.write_csv(out / "folds.csv", ["mu", "P", "tangent"], [[f.value, f.P, f.tangent] for f in folds], comments=config_tag(cfg))

    scan = energy.energy_minimum(seed, n_samples=cfg.energy_samples)
    persist.write_csv(
        out / "energy_scan.csv", ["P", "I", "mu"], [[P, I, m] for (P, I), m in zip(scan.rows, scan.mu_rows)], comments=config_tag(cfg)
    )

    print(f"main family reaches mu={max(p.mu for p in up.points):.6f} ({up.reason})")
    for f in folds:
        print(f"fold mu*={f.value:.11f} P*={f.P:.6f}")
    print(f"at mu={cfg.lower_level}: main P={seed.P:.6f}, other branch P={back.points[-1].P:.6f}")
    print(f"energy minimum at eps=1e-3: P_min={scan.P_min:.6f} (law {energy.mueller_period(1e-3):.6f})")


if __name__ == "__main__":
    main()
