"""Crofton estimate and standard error against sample count."""

import argparse
import math

from flatsym import connection
from flatsym.metrics import FinslerModel

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()
    hyp = FinslerModel()
    for d in (0.5, 1.0, 2.0):
        for n in (10_000, 100_000, 1_000_000):
            r = connection.crofton_measure(hyp, (0.0, 1.0), (0.0, math.exp(d)), n, args.seed)
            print(f"d={d} n={n:>8} estimate={r.estimate:.5f} 2d={2 * d} stderr={r.stderr:.2e} "
                  f"stderr*sqrt(n)={r.stderr * math.sqrt(n):.3f}")
