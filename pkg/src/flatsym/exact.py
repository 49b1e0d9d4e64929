"""Exact rational + pi arithmetic for the pairing computation.

Everything here works over ``fractions.Fraction``. The quadrature routes
(``cmn_quad`` and ``pairing_coefficient_numeric``) are independent float
oracles for the exact ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

READINGS = ("R1", "R2")
# rational pi to 50 places so the float image of a + b*pi is rounded once,
# after the cancellation between a and b*pi
PI_50 = Fraction("3.14159265358979323846264338327950288419716939937511")


class DivergentIntegralError(ValueError):
    pass


class ToleranceError(RuntimeError):
    pass


def _frac(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


@dataclass(frozen=True)
class QPi:
    """The number ``a + b*pi`` with rational ``a`` and ``b``."""

    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "a", _frac(self.a))
        object.__setattr__(self, "b", _frac(self.b))

    def __add__(self, other):
        if isinstance(other, QPi):
            return QPi(self.a + other.a, self.b + other.b)
        if isinstance(other, (int, Fraction)):
            return QPi(self.a + other, self.b)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return QPi(-self.a, -self.b)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, (int, Fraction)):
            return QPi(self.a * scalar, self.b * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __float__(self):
        return float(self.a + self.b * PI_50)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __str__(self):
        return f"{self.a} + {self.b}*pi"


@dataclass(frozen=True)
class RatPoly:
    """Polynomial with rational coefficients, ``coeffs[k]`` multiplies x**k."""

    coeffs: tuple = (Fraction(1),)

    def __post_init__(self):
        cs = [_frac(c) for c in self.coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs) if cs else (Fraction(0),))

    @property
    def degree(self) -> int:
        if len(self.coeffs) == 1 and self.coeffs[0] == 0:
            return -1
        return len(self.coeffs) - 1

    @property
    def constant(self) -> Fraction:
        return self.coeffs[0]

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1]

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


def apply_d(poly: RatPoly, m: int) -> RatPoly:
    """One application of ``m x + (x^2 - 1)/2 d/dx``."""
    cs = poly.coeffs
    out = [Fraction(0)] * (len(cs) + 1)
    for k, c in enumerate(cs):
        out[k + 1] += m * c
        if k:
            # (x^2 - 1)/2 * k c x^(k-1)
            out[k + 1] += Fraction(k, 2) * c
            out[k - 1] -= Fraction(k, 2) * c
    return RatPoly(tuple(out))


def d_recursion(m: int, k: int) -> RatPoly:
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    return _d_chain(m, k)[k]


@lru_cache(maxsize=64)
def _d_chain(m: int, k: int) -> tuple:
    polys = [RatPoly((Fraction(1),))]
    for _ in range(k):
        polys.append(apply_d(polys[-1], m))
    return tuple(polys)


def _series_mul(p: Sequence[Fraction], q: Sequence[Fraction], order: int) -> list:
    out = [Fraction(0)] * (order + 1)
    for i, pi in enumerate(p[: order + 1]):
        if pi == 0:
            continue
        for j, qj in enumerate(q[: order + 1 - i]):
            out[i + j] += pi * qj
    return out


def sech_power_taylor(m: int, order: int) -> list:
    """Taylor coefficients of cosh(z/2)**(-2m) through z**order, exactly.

    Writes cosh(z/2) = 1 + w with w = O(z^2) and sums the negative binomial
    series (1 + w)^(-2m) = sum_j binom(-2m, j) w^j.
    """
    w = [Fraction(0)] * (order + 1)
    for k in range(1, order // 2 + 1):
        w[2 * k] = Fraction(1, 4**k * math.factorial(2 * k))
    out = [Fraction(0)] * (order + 1)
    out[0] = Fraction(1)
    w_power = [Fraction(1)] + [Fraction(0)] * order
    binom = Fraction(1)
    for j in range(1, order // 2 + 1):
        binom = binom * (-2 * m - j + 1) / j
        w_power = _series_mul(w_power, w, order)
        for i, c in enumerate(w_power):
            out[i] += binom * c
    return out


def genfun_series(m: int, order: int) -> list:
    chain = _d_chain(m, order)
    return [chain[k].constant / math.factorial(k) for k in range(order + 1)]


def genfun_check(m: int, order: int) -> list:
    """Exact differences between sum_k const(a_k) z^k/k! and the sech target."""
    if m < 1 or order < 0 or order > 16:
        raise ValueError("need m >= 1 and 0 <= order <= 16")
    lhs = genfun_series(m, order)
    rhs = sech_power_taylor(m, order)
    return [a - b for a, b in zip(lhs, rhs)]


def _check_mn(m: int, n: int):
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    if m + n < 1:
        raise DivergentIntegralError("c_{0,0} diverges")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    tail_bound: float
    cutoff: float


def cmn_quad_detail(m: int, n: int, tol: float = 1e-12) -> QuadResult:
    _check_mn(m, n)
    k = m + n
    # tail of the even integrand is below 2^k e^{-k t}/k on each side
    cutoff = (k * math.log(2) - math.log(k * tol / 4)) / k
    cutoff = max(cutoff, 1.0)

    def integrand(t):
        ch = math.cosh(t)
        return ch ** (-n) * (1.0 + ch) ** (-m)

    val, err = integrate.quad(integrand, 0.0, cutoff, epsabs=tol / 4, epsrel=1e-14, limit=400)
    tail = 2 * 2.0**k * math.exp(-k * cutoff) / k
    total_err = 2 * err + tail
    if total_err > tol:
        raise ToleranceError(f"c_{{{m},{n}}} quadrature error {total_err:.3e} > {tol:.3e}")
    return QuadResult(2 * val, total_err, tail, cutoff)


def cmn_quad(m: int, n: int, tol: float = 1e-12) -> float:
    return cmn_quad_detail(m, n, tol).value


def _poly_divmod(num: list, den: list):
    num = list(num)
    q = [Fraction(0)] * max(len(num) - len(den) + 1, 1)
    lead = den[-1]
    for shift in range(len(num) - len(den), -1, -1):
        c = num[shift + len(den) - 1] / lead
        q[shift] = c
        if c:
            for i, d in enumerate(den):
                num[shift + i] -= c * d
    rem = num[: len(den) - 1]
    return q, rem


def _binomial_poly(sign: int, power: int) -> list:
    """Coefficients in s of (1 + sign*s)**power."""
    return [Fraction(math.comb(power, j) * sign**j) for j in range(power + 1)]


@lru_cache(maxsize=None)
def _even_moment(j: int, n: int) -> QPi:
    """Integral over [-1, 1] of x^(2j) (1+x^2)^(-n)."""
    if n == 0:
        return QPi(Fraction(2, 2 * j + 1), 0)
    if j == 0:
        if n == 1:
            return QPi(0, Fraction(1, 2))
        k = n - 1
        # I_{k+1} = 2^(1-k)/(2k) + (2k-1)/(2k) I_k
        return QPi(Fraction(2, 2**k * 2 * k), 0) + _even_moment(0, k) * Fraction(2 * k - 1, 2 * k)
    return _even_moment(j - 1, n - 1) - _even_moment(j - 1, n)


def cmn_exact(m: int, n: int) -> QPi:
    """c_{m,n} as a + b*pi via x = tanh(t/2).

    The integrand becomes 2^(1-m) (1-x^2)^(m+n-1) (1+x^2)^(-n); in s = x^2
    we divide (1-s)^(m+n-1) by (1+s)^n and integrate quotient and remainder.
    """
    _check_mn(m, n)
    numerator = _binomial_poly(-1, m + n - 1)
    if n == 0:
        quotient, remainder = numerator, []
    else:
        quotient, remainder = _poly_divmod(numerator, _binomial_poly(1, n))
    total = QPi()
    for j, c in enumerate(quotient):
        if c:
            total = total + QPi(Fraction(2, 2 * j + 1) * c, 0)
    for j, c in enumerate(remainder):
        if c:
            total = total + _even_moment(j, n) * c
    return total * Fraction(2) ** (1 - m)


def pairing_terms(m: int, reading: str):
    """The printed pairing combination as a list of (coefficient, (m', n'))."""
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    if m < 3:
        raise ValueError("pairing formula needs m >= 3")
    pre = 2 ** (m - 1) * m * (m - 2)
    bracket = [
        (2, (m - 1, m - 1)),
        (-1, (m - 1, m + 1)),
        (-1, (m, m + 1)),
        (-1, (m, m - 1)),
        (-2, (m, m - 3)),
    ]
    loose = (m * (m - 1), (m - 2, m + 1))
    tail = [
        (m * m * (m - 4), (0, m - 1)),
        (-m * (m * m - 4 * m + 2), (0, m + 1)),
        (-2, (0, m)),
    ]
    if reading == "R1":
        return [(pre * c, mn) for c, mn in bracket] + [loose] + tail
    return [(pre * c, mn) for c, mn in bracket + [(loose[0], loose[1])]] + tail


def pairing_coefficient_exact(m: int, reading: str = "R1") -> QPi:
    total = QPi()
    for coeff, (mm, nn) in pairing_terms(m, reading):
        if coeff:
            total = total + cmn_exact(mm, nn) * coeff
    return total


def pairing_coefficient_from_quad(m: int, reading: str = "R1") -> float:
    return sum(c * cmn_quad(mm, nn) for c, (mm, nn) in pairing_terms(m, reading))


def sech_kernel(z, m: int, derivative: int = 0):
    """F(z) = 2^m (1 + cosh z)^(-m) and its first two derivatives."""
    z = np.asarray(z, dtype=float)
    g = 1.0 + np.cosh(z)
    scale = 2.0**m
    if derivative == 0:
        return scale * g ** (-m)
    if derivative == 1:
        return -m * scale * g ** (-m - 1) * np.sinh(z)
    if derivative == 2:
        return scale * (m * (m + 1) * g ** (-m - 2) * np.sinh(z) ** 2 - m * g ** (-m - 1) * np.cosh(z))
    raise ValueError("derivative must be 0, 1 or 2")


def transport_mode(t: float, m: int, dc_weight: float = 1.0, dk_weight: float = 1.0, tol: float = 1e-12) -> float:
    """Mode-reduced h(t): the e^{im phi} coefficient of the transport integral."""
    dk_amp = dk_weight * m * (2 - m) / 2.0
    dc_amp = dc_weight * m * (m * m - 4) / 2.0

    def integrand(s):
        z = t - s
        dk = dk_amp * (sech_kernel(z, m, 2) + (m + 1) * sech_kernel(z, m))
        dc = dc_amp * sech_kernel(z, m, 1)
        return float(dk * math.sinh(s) * math.cosh(s) + dc * math.sinh(s) ** 2)

    if t == 0.0:
        return 0.0
    val, err = integrate.quad(integrand, 0.0, t, epsabs=tol, epsrel=1e-12, limit=200)
    return val


# Circle-integral convention: after integrating over the fibre, b1*v pairs
# like -b2*u, so every term is reported as a multiple of the b2*u integral.
ANGULAR_NORMALIZATION = 1.0
LOCAL_WEIGHT = 2.0


def pairing_coefficient_numeric(
    m: int,
    tol: float = 1e-9,
    include_transport: bool = True,
    cutoff: float = 40.0,
) -> float:
    """Universal t-coefficient of the pairing by double quadrature.

    Integrand is [-h(t)/cosh t - LOCAL_WEIGHT cosh t] cosh^(-m) t, where the
    local weight collects b1 v cosh t and b2 u cosh t under the circle
    convention above.
    """
    if m < 3:
        raise ValueError("pairing needs m >= 3")
    w = 1.0 if include_transport else 0.0

    def integrand(t):
        ch = math.cosh(t)
        glob = transport_mode(t, m, w, w, tol=tol * 1e-2) / ch if w else 0.0
        return (-glob - LOCAL_WEIGHT * ch) * ch ** (-m)

    left, e1 = integrate.quad(integrand, -cutoff, 0.0, epsabs=tol, epsrel=1e-11, limit=400)
    right, e2 = integrate.quad(integrand, 0.0, cutoff, epsabs=tol, epsrel=1e-11, limit=400)
    if e1 + e2 > tol * 10:
        raise ToleranceError(f"pairing quadrature error {e1 + e2:.3e}")
    return ANGULAR_NORMALIZATION * (left + right)


def adjudicate_reading(m_values=(3, 4, 5), tol: float = 1e-6):
    """Compare each reading against the numeric route.

    Returns (best_reading or None, table) where table maps m to
    (numeric, {reading: exact float}).
    """
    table = {}
    for m in m_values:
        numeric = pairing_coefficient_numeric(m)
        table[m] = (numeric, {r: float(pairing_coefficient_exact(m, r)) for r in READINGS})
    agreeing = [r for r in READINGS if all(abs(table[m][1][r] - table[m][0]) <= tol for m in m_values)]
    return (agreeing[0] if agreeing else None), table
