"""Numeric pairing coefficient against both readings of the closed form,
and a two-parameter fit showing no rescaling reconciles them."""

import numpy as np

from flatsym import exact


def transport_part(m):
    return exact.pairing_coefficient_numeric(m) - exact.pairing_coefficient_numeric(m, include_transport=False)


def local_part(m):
    return exact.pairing_coefficient_numeric(m, include_transport=False) / exact.LOCAL_WEIGHT


if __name__ == "__main__":
    ms = (3, 4, 5, 6)
    T = {m: transport_part(m) for m in ms}
    L = {m: local_part(m) for m in ms}
    print("m  numeric  R1  R2")
    for m in ms:
        print(m, f"{exact.pairing_coefficient_numeric(m):.6g}",
              *(f"{float(exact.pairing_coefficient_exact(m, r)):.6g}" for r in exact.READINGS))
    for reading in exact.READINGS:
        target = {m: float(exact.pairing_coefficient_exact(m, reading)) for m in ms}
        A = np.array([[T[m], L[m]] for m in (3, 4)])
        alpha, beta = np.linalg.solve(A, [target[3], target[4]])
        misses = [alpha * T[m] + beta * L[m] - target[m] for m in (5, 6)]
        print(f"{reading}: fit on m=3,4 gives alpha={alpha:.4g} beta={beta:.4g}; miss at m=5,6: "
              + ", ".join(f"{x:.4g}" for x in misses))
