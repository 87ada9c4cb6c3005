"""Leftmost fold of the main family versus eps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from _common import config_tag, parse_config

from laminate_orbits import persist
from laminate_orbits.continuation import trace_fold_in_eps


@dataclass
class FoldTraceConfig:
    grid: tuple = (1e-1, 1e-2, 1e-5)
    out: str = "results/fold_trace"


def main() -> None:
    cfg, out = parse_config(FoldTraceConfig, __doc__)
    rows = trace_fold_in_eps(list(cfg.grid))
    persist.write_csv(
        out / "folds.csv", ["eps", "mu_star", "P_star", "ok"], [[r.eps, r.mu_star, r.P_star, int(r.ok)] for r in rows], comments=config_tag(cfg)
    )
    for r in rows:
        print(f"eps={r.eps:g}: mu*={r.mu_star:.11f}  mu*+1/8={r.mu_star + 0.125:.3e}  P*={r.P_star:.6g} {r.note}")
    good = [r for r in rows if r.ok]
    if len(good) >= 2:
        k = np.polyfit(np.log([r.eps for r in good]), np.log([r.P_star for r in good]), 1)[0]
        print(f"log-log slope of P*: {k:.3f}")


if __name__ == "__main__":
    main()
