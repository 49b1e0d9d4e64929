"""First-order deformations of the hyperbolic model.

Everything here lives on the hyperbolic unit tangent bundle with the closed
form frame. Frame derivatives of test fields are central differences along
the frame vectors, step 1e-4 unless stated.

Weight convention: ``cr_field`` returns h = a(z) y^m e^{i m phi}, which
satisfies (X + iY) h = 0 and Zh = +i m h. The closure equation for a
deformation b1 omega + b2 theta only admits the decaying t-profile
cosh^-(m+1) when b1 - i b2 has weight -m; see ``CRDeformation``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as quad

from .connection import hyperbolic_y_flow
from .flows import integrate
from .metrics import FinslerModel, UPoint, ValidationError, frame_and_coframe, hyperbolic_frame

TWO_PI = 2.0 * math.pi
STEP = 1e-4

Field = Callable[[np.ndarray], complex]


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class HolDiff:
    """a(z) dz^m with a given by polynomial coefficients in z."""

    m: int
    coeffs: tuple = (1.0,)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"degree must be an integer >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValidationError("need at least one coefficient")

    def __call__(self, z: complex) -> complex:
        out = 0j
        for c in reversed(self.coeffs):
            out = out * z + c
        return out

    @property
    def constant(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)


def parse_holdiff(m: int, text: str) -> HolDiff:
    """Coefficients as a comma list of Python complex literals, e.g. ``1,0.5j``."""
    try:
        coeffs = tuple(complex(part.strip().replace(" ", "")) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad coefficient list {text!r}") from exc
    return HolDiff(m, coeffs)


# --- frame calculus -------------------------------------------------------------


def _vector(field_id: str, q: np.ndarray) -> np.ndarray:
    x, y, phi = q
    c, s = math.cos(phi), math.sin(phi)
    if field_id == "X":
        return np.array([y * c, y * s, -c])
    if field_id == "Y":
        return np.array([-y * s, y * c, s])
    if field_id == "Z":
        return np.array([0.0, 0.0, 1.0])
    raise ValueError(f"unknown frame field {field_id!r}")


def _central(g: Callable[[float], complex], h: float, stencil: int = 2):
    """Derivative at 0 of a function of one variable, 2- or 4-point central stencil."""
    if stencil == 2:
        return (g(h) - g(-h)) / (2 * h)
    if stencil == 4:
        return (8 * (g(h) - g(-h)) - (g(2 * h) - g(-2 * h))) / (12 * h)
    raise ValueError("stencil must be 2 or 4")


def frame_derivative(f: Field, field_id: str, q, h: float = STEP, stencil: int = 2):
    """Central difference of f along the hyperbolic frame vector at q."""
    q = np.asarray(q, dtype=float)
    v = _vector(field_id, q)
    return _central(lambda s: f(q + s * v), h, stencil)


def derived(f: Field, word: str, h: float = STEP) -> Field:
    """Field for the word applied to f, e.g. ``derived(f, "YX")`` is Y(X f)."""
    g = f
    for field_id in reversed(word):
        g = (lambda inner, fid: (lambda q: frame_derivative(inner, fid, q, h)))(g, field_id)
    return g


def _q(u: UPoint | Sequence[float]) -> np.ndarray:
    if isinstance(u, UPoint):
        return u.as_array()
    return np.asarray(u, dtype=float)


# --- CR functions -------------------------------------------------------------


def cr_field(a: HolDiff, u, weight: int | None = None) -> complex:
    """a(z) y^k e^{i k phi}; k defaults to the degree of a."""
    x, y, phi = _q(u)
    if not y > 0:
        raise ValidationError(f"need y > 0, got {y}")
    k = a.m if weight is None else weight
    return a(complex(x, y)) * y**k * complex(math.cos(k * phi), math.sin(k * phi))


def cr_residual(a: HolDiff, u, h: float = STEP, weight: int | None = None) -> float:
    """|(X + iY) h| by central differences."""

    def f(q):
        return cr_field(a, q, weight)

    q = _q(u)
    return abs(frame_derivative(f, "X", q, h) + 1j * frame_derivative(f, "Y", q, h))


def casimir_eigen_residual(a: HolDiff, u, h: float = STEP) -> float:
    """|(X^2 + Y^2 - Z^2) h - m(m-1) h| with Z^2 h = -m^2 h used exactly."""

    def f(q):
        return cr_field(a, q)

    q = _q(u)
    m = a.m
    lap = derived(f, "XX", h)(q) + derived(f, "YY", h)(q)
    return abs(lap + m * m * f(q) - m * (m - 1) * f(q))


@dataclass(frozen=True)
class CRDeformation:
    """b1 omega + b2 theta with b1 - i b2 = cr_field(a, weight) * cosh(t)^(weight - 1).

    The t-profile is the one forced by the closure equation for a weight-k
    pair: (1 - k) b1 f1' + b1_t f2' = 0 with f1' = sinh t, f2' = -cosh t.
    weight = -m gives the decaying profile cosh^-(m+1); weight = +m (the
    lift of a dz^m) closes only with cosh^(m-1).
    """

    a: HolDiff
    weight: int | None = None

    @property
    def k(self) -> int:
        return -self.a.m if self.weight is None else self.weight

    def profile(self, t: float) -> float:
        return math.cosh(t) ** (self.k - 1)

    def components(self, q, t: float) -> tuple[float, float]:
        c = cr_field(self.a, q, self.k) * self.profile(t)
        return c.real, -c.imag

    def b1(self, q, t: float) -> float:
        return self.components(q, t)[0]

    def b2(self, q, t: float) -> float:
        return self.components(q, t)[1]


def closure_residual(b1: Callable, b2: Callable, u, t: float, h: float = STEP, stencil: int = 4) -> float:
    """(X b2 - Y b1) f2' - (Z b2 + b1) f1' + b1_t f2' for the hyperbolic pair.

    b1, b2 are callables of (q, t). The default 4-point stencil keeps the
    truncation error below the closure tolerance for large-amplitude
    deformations (y^-m near the bottom of the window).
    """
    q = _q(u)
    f1p, f2p = math.sinh(t), -math.cosh(t)

    def at_t(fn):
        return lambda r: fn(r, t)

    xb2 = frame_derivative(at_t(b2), "X", q, h, stencil)
    yb1 = frame_derivative(at_t(b1), "Y", q, h, stencil)
    zb2 = frame_derivative(at_t(b2), "Z", q, h, stencil)
    b1t = _central(lambda s: b1(q, t + s), h, stencil)
    return (xb2 - yb1) * f2p - (zb2 + b1(q, t)) * f1p + b1t * f2p


def cr_closure_residual(
    a: HolDiff, u, t: float, h: float = STEP, weight: int | None = None, stencil: int = 4
) -> float:
    if a.is_zero:
        return 0.0
    d = CRDeformation(a, weight)
    return closure_residual(d.b1, d.b2, u, t, h, stencil)


def dA_scalar(f: Callable, u, t: float, h: float = STEP) -> tuple[float, float]:
    """(omega, theta) components of d_A f = (Xf + tanh t Zf) omega + (Yf - f_t) theta.

    f is a callable of (q, t).
    """
    q = _q(u)
    g = lambda r: f(r, t)  # noqa: E731
    xf = frame_derivative(g, "X", q, h)
    yf = frame_derivative(g, "Y", q, h)
    zf = frame_derivative(g, "Z", q, h)
    ft = (f(q, t + h) - f(q, t - h)) / (2 * h)
    return xf + math.tanh(t) * zf, yf - ft


# --- fold-boundary variation ------------------------------------------------------


def hk_u(a: HolDiff) -> Field:
    """u = dL/L = -Im(a(z) y^m e^{i m phi})."""
    return lambda q: -cr_field(a, q).imag


def hk_u_conjugate(a: HolDiff) -> Field:
    """u* with u + i u* = i a(z) y^m e^{i m phi}."""
    return lambda q: cr_field(a, q).real


@dataclass(frozen=True)
class DeformationSample:
    x: float
    y: float
    phi: float
    u: float
    v: float
    w: float
    d_eta: tuple
    dC: float
    dK: float
    casimir: float

    def row(self, t: float = 0.0, h_value: float = 0.0) -> tuple:
        return (self.x, self.y, self.phi, t, self.u, self.v, self.w, self.dC, self.dK, h_value)


SAMPLE_COLUMNS = ("x", "y", "phi", "t", "u", "v", "w", "dC", "dK", "h")


def delta_C(a: HolDiff, h: float = STEP) -> Field:
    m = a.m
    yu = derived(hk_u(a), "Y", h)
    return lambda q: m * (m * m - 4) / 2.0 * yu(q)


def delta_K(a: HolDiff, h: float = STEP) -> Field:
    m = a.m
    u = hk_u(a)
    yyu = derived(u, "YY", h)
    return lambda q: m * (2 - m) / 2.0 * (yyu(q) + (m + 1) * u(q))


def delta_K_rederived(a: HolDiff, h: float = STEP) -> Field:
    """dK from varying d eta = -(K omega + C eta) ^ theta with the eta variation above.

    Equals (m-1) Y^2u - (1 - m^2/2) X^2u + 2u; with X^2u = -Y^2u - mu this is
    (2-m)/2 (m Y^2u + (m^2 + 2m + 2) u). It differs from ``delta_K`` by
    (4 - m^2)/2 u, so the two agree only at m = 2.
    """
    m = a.m
    u = hk_u(a)
    yyu = derived(u, "YY", h)
    return lambda q: (2 - m) / 2.0 * (m * yyu(q) + (m * m + 2 * m + 2) * u(q))


def hk_variation(a: HolDiff, point, h: float = STEP) -> DeformationSample:
    """u, v = Zu, w = u + Zv/2, the eta variation, dC, dK and the Casimir residual."""
    q = _q(point)
    m = a.m
    u = hk_u(a)
    v = derived(u, "Z", h)
    u0 = u(q)
    xu = derived(u, "X", h)(q)
    yu = derived(u, "Y", h)(q)
    w = u0 + derived(v, "Z", h)(q) / 2.0
    d_eta = ((m - 1) * yu, (1 - m * m / 2.0) * xu, -(m * m / 2.0) * u0)
    casimir = derived(u, "XX", h)(q) + derived(u, "YY", h)(q) + m * u0
    return DeformationSample(
        float(q[0]),
        float(q[1]),
        float(q[2]),
        u0,
        v(q),
        w,
        d_eta,
        delta_C(a, h)(q),
        delta_K(a, h)(q),
        casimir,
    )


def casimir_residual(a: HolDiff, point, h: float = STEP) -> float:
    return abs(hk_variation(a, point, h).casimir)


def variation_model(a: HolDiff, eps: float) -> FinslerModel:
    if not a.constant:
        raise ValidationError("the perturbed norm is only catalogued for constant a")
    c = a.coeffs[0]
    return FinslerModel("hkvariation", (("m", a.m), ("a1", c.real), ("a2", c.imag), ("eps", eps)))


def measured_invariant_variation(a: HolDiff, point, eps: float = 1e-3, h: float = STEP) -> tuple[float, float]:
    """(dC, dK) by symmetric differences in eps of the perturbed norm's invariants."""
    u = point if isinstance(point, UPoint) else UPoint(*point)
    plus = frame_and_coframe(variation_model(a, eps), u, h, "analytic")
    minus = frame_and_coframe(variation_model(a, -eps), u, h, "analytic")
    return (plus.C - minus.C) / (2 * eps), (plus.K - minus.K) / (2 * eps)


# --- transport integral ---------------------------------------------------------


def _y_flow_point(q: np.ndarray, s: float) -> np.ndarray:
    x, y, phi = hyperbolic_y_flow(q[0], q[1], q[2], s)
    return np.array([float(x), float(y), float(phi)])


def transport_h(
    dK: Field, dC: Field, u, t: float, tol: float = 1e-10, sign: int = -1, y_min: float = 1e-8
) -> float:
    """h(t) = delta f1 cosh t + delta f2 sinh t at (u, t).

    Integrates dK(psi_{t-s} q) sinh s cosh s + dC(psi_{t-s} q) sinh^2 s over
    [0, t] along the Y-flow psi. ``sign = -1`` solves Yh - h_t = dK sinh t
    cosh t + dC sinh^2 t with zero initial data; ``sign = +1`` is the same
    integral without the minus sign.
    """
    q = _q(u)
    if t == 0.0:
        return 0.0

    def integrand(s):
        r = _y_flow_point(q, t - s)
        if not r[1] > y_min:
            raise TruncationError(f"Y-flow left the half-plane at s={s}")
        return dK(r) * math.sinh(s) * math.cosh(s) + dC(r) * math.sinh(s) ** 2

    val, err = quad.quad(integrand, 0.0, t, epsabs=tol, epsrel=tol, limit=200)
    return sign * val


def delta_f_characteristic(dK: Field, dC: Field, u, t: float, tol: float = 1e-11) -> tuple[float, float]:
    """(delta f1, delta f2) at (u, t) by integrating the varied Jacobi system.

    Along s -> (psi_s q, t - s) the system (Y - d/dt) df1 = dK sinh t + df2,
    (Y - d/dt) df2 = df1 + dC sinh t becomes an ODE in s with zero data at
    s = t; it is integrated backwards to s = 0.
    """
    q = _q(u)
    if t == 0.0:
        return 0.0, 0.0
    def rhs(sigma, state):
        # sigma runs from 0 at s = t down to -t at s = 0
        s = t + sigma
        r = _y_flow_point(q, s)
        tau = t - s
        return np.array([dK(r) * math.sinh(tau) + state[1], state[0] + dC(r) * math.sinh(tau)])

    sol = integrate(rhs, [0.0, 0.0], -t, tol=tol)
    f1, f2 = sol.ys[-1]
    return float(f1), float(f2)


def class_representative(a: HolDiff, point, t: float, h: float = STEP) -> tuple[float, float]:
    """omega and theta components of the H* part of the varied connection potential."""
    q = _q(point)
    u = hk_u(a)
    v = derived(u, "Z", h)
    w = lambda r: u(r) + derived(v, "Z", h)(r) / 2.0  # noqa: E731
    global_part = transport_h(delta_K(a), delta_C(a), q, t) / math.cosh(t)
    xv_yu = derived(v, "X", h)(q) - derived(u, "Y", h)(q)
    ch, sh, th = math.cosh(t), math.sinh(t), math.tanh(t)
    omega = global_part + u(q) * ch - xv_yu * sh + (w(q) - u(q)) * th
    theta = v(q) * ch - derived(w, "X", h)(q) * sh
    return omega, theta


# --- circle integrals -------------------------------------------------------------


def circle_integral(fn: Callable[[float], float], n: int = 256) -> float:
    """Trapezoid rule over [0, 2 pi); exact for trigonometric polynomials of degree < n."""
    phis = TWO_PI * np.arange(n) / n
    return float(TWO_PI / n * sum(fn(p) for p in phis))


def angular_pairing(u_field: Field, b2_field: Field, x: float, y: float, n: int = 256) -> float:
    """Fibre integral of u * b2 over the circle above (x, y)."""
    return circle_integral(lambda phi: u_field(np.array([x, y, phi])) * b2_field(np.array([x, y, phi])), n)


def cr_b2(a: HolDiff, weight: int | None = None) -> Field:
    """theta-coefficient of the t = 0 slice of a CR deformation."""
    d = CRDeformation(a, weight)
    return lambda q: d.b2(q, 0.0)


# --- Lie derivative triviality ---------------------------------------------------


def hyperbolic_beta(q4: np.ndarray) -> np.ndarray:
    """f1 omega + f2 eta on U x R in (dx, dy, dphi, dt) components."""
    x, y, phi, t = q4
    f = hyperbolic_frame(UPoint(x, y, phi))
    out = np.zeros(4)
    out[:3] = math.cosh(t) * f.omega - math.sinh(t) * f.eta
    return out


def hyperbolic_alpha(q4: np.ndarray) -> np.ndarray:
    """-(f1' omega + f2' eta) ^ (theta + dt) as an antisymmetric 4x4 matrix."""
    x, y, phi, t = q4
    f = hyperbolic_frame(UPoint(x, y, phi))
    left = np.zeros(4)
    left[:3] = -(math.sinh(t) * f.omega - math.cosh(t) * f.eta)
    right = np.zeros(4)
    right[:3] = f.theta
    right[3] = 1.0
    return np.outer(left, right) - np.outer(right, left)


def _top(a: np.ndarray, b: np.ndarray) -> float:
    """dx^dy^dphi^dt coefficient of A ^ B for 2-forms stored as A[i, j] = A(e_i, e_j)."""
    return (
        a[0, 1] * b[2, 3]
        - a[0, 2] * b[1, 3]
        + a[0, 3] * b[1, 2]
        + a[1, 2] * b[0, 3]
        - a[1, 3] * b[0, 2]
        + a[2, 3] * b[0, 1]
    )


def natural_lift(surface_field: Callable[[float, float], tuple[float, float]], h: float = 1e-6) -> Callable:
    """Lift of a surface vector field to U x R through its action on directions."""

    def W(q4):
        x, y, phi, _ = q4
        vx, vy = surface_field(x, y)
        jac = np.zeros((2, 2))
        for j, e in enumerate(((h, 0.0), (0.0, h))):
            p = surface_field(x + e[0], y + e[1])
            m = surface_field(x - e[0], y - e[1])
            jac[:, j] = (np.array(p) - np.array(m)) / (2 * h)
        d = np.array([math.cos(phi), math.sin(phi)])
        n = np.array([-math.sin(phi), math.cos(phi)])
        return np.array([vx, vy, n @ jac @ d, 0.0])

    return W


def lie_triviality_residual(W: Callable, point, t: float, h: float = STEP) -> float:
    """Largest component of the 3-form alpha ^ (L_W beta - d(i_W beta)).

    L_W beta uses W^i d_i beta_j + beta_i d_j W^i, d(i_W beta) differentiates
    the contraction; both by central differences. Components are read by
    wedging with each coordinate 1-form and dividing by the frame volume.
    """
    q4 = np.append(_q(point), t)
    grad_beta = np.zeros((4, 4))  # [i, j] = d_i beta_j
    grad_w = np.zeros((4, 4))  # [j, i] = d_j W^i
    grad_c = np.zeros(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        grad_beta[i] = (hyperbolic_beta(q4 + e) - hyperbolic_beta(q4 - e)) / (2 * h)
        grad_w[i] = (W(q4 + e) - W(q4 - e)) / (2 * h)
        grad_c[i] = (W(q4 + e) @ hyperbolic_beta(q4 + e) - W(q4 - e) @ hyperbolic_beta(q4 - e)) / (2 * h)
    w = W(q4)
    beta = hyperbolic_beta(q4)
    lie = w @ grad_beta + grad_w @ beta
    gamma = lie - grad_c  # a 1-form
    alpha = hyperbolic_alpha(q4)
    worst = 0.0
    volume = 1.0 / q4[1] ** 2
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1.0
        two = np.outer(gamma, e) - np.outer(e, gamma)
        worst = max(worst, abs(_top(alpha, two)) / volume)
    return worst
