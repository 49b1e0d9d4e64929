"""Holonomy of the unit square for the two signs of the transported theta
correction (derived +1, printed -1)."""

import argparse
import time
from dataclasses import dataclass

from flatsym import connection
from flatsym.metrics import parse_model


@dataclass
class Config:
    model: str = "randers:eps=0.02"
    probes: int = 1
    tol: float = 1e-6


def run(cfg: Config):
    model = parse_model(cfg.model)
    loop = connection.square_loop()
    probes = connection.default_probes(cfg.probes)
    for sign in (1, -1):
        start = time.perf_counter()
        disp = connection.holonomy_loop(model, loop, probes, cfg.tol, theta_rate_sign=sign)
        print(f"sign={sign:+d} displacement={disp:.3e} ({time.perf_counter() - start:.1f}s)")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model", default=Config.model)
    p.add_argument("--probes", type=int, default=Config.probes)
    p.add_argument("--tol", type=float, default=Config.tol)
    args = p.parse_args()
    run(Config(args.model, args.probes, args.tol))
