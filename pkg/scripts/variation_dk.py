"""Measured first variation of C and K for the fold-boundary perturbation,
against the printed dK and the re-derived dK."""

import argparse
from dataclasses import dataclass

import numpy as np

from flatsym import deformation as dm
from flatsym.deformation import HolDiff


@dataclass
class Config:
    a: complex = 0.7 + 0.4j
    point: tuple = (0.1, 1.1, 0.7)
    eps: float = 2e-4
    degrees: tuple = (1, 2, 3, 4, 5)


def run(cfg: Config):
    q = np.array(cfg.point)
    print("m  measured_dC  formula_dC  measured_dK  printed_dK  rederived_dK")
    for m in cfg.degrees:
        a = HolDiff(m, (cfg.a,))
        dC, dK = dm.measured_invariant_variation(a, q, cfg.eps)
        print(
            f"{m}  {dC:11.5f}  {dm.delta_C(a)(q):10.5f}  {dK:11.5f}  "
            f"{dm.delta_K(a)(q):10.5f}  {dm.delta_K_rederived(a)(q):12.5f}"
        )


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eps", type=float, default=Config.eps)
    args = p.parse_args()
    run(Config(eps=args.eps))
