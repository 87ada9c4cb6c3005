"""Energy-minimizing period versus eps and the fit of the scaling law."""
from __future__ import annotations

from dataclasses import dataclass

from _common import config_tag, parse_config

from laminate_orbits import energy, persist
from laminate_orbits.seed import build_seed_orbit


@dataclass
class ScalingConfig:
    grid: tuple = (1e-1, 1e-2, 1e-3, 10**-3.5, 1e-4, 10**-4.5, 1e-5, 10**-5.5, 1e-6)
    fit_max_eps: float = 1e-3
    n_samples: int = 15
    out: str = "results/scaling"


def main() -> None:
    cfg, out = parse_config(ScalingConfig, __doc__)
    rows = energy.period_scaling(list(cfg.grid), base=build_seed_orbit(1e-3), n_samples=cfg.n_samples)
    persist.write_csv(
        out / "scaling.csv",
        ["eps", "P_min", "P_mueller", "ratio", "boundary_min"],
        [[r.eps, r.P_min, r.P_mueller, r.ratio, int(r.boundary)] for r in rows],
        comments=config_tag(cfg),
    )
    for r in rows:
        if r.scan is not None:
            persist.write_csv(out / f"scan_eps_{r.eps:.6g}.csv", ["P", "I"], r.scan.rows, comments=config_tag(cfg))
        print(f"eps={r.eps:.3g}: P_min={r.P_min:.6g} law={r.P_mueller:.6g} ratio={r.ratio:.4f} {r.note}")
    fit = [(r.eps, r.P_min) for r in rows if r.ok and r.eps <= cfg.fit_max_eps]
    if len(fit) >= 4:
        alpha, C, res = energy.scaling_fit(fit)
        print(f"alpha={alpha:.4f} C={C:.4f} max residual={res:.2e}")


if __name__ == "__main__":
    main()
