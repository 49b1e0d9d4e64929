"""Finsler surface models on the upper half-plane and their canonical frames.

A model is a homogeneous norm F(x, y; u1, u2). In a slope chart the norm is
the Lagrangian L(x, y, p) = F(x, y; s, s p) (or F(x, y; s q, s) in the
rotated chart), and the coframe is

    omega = L dx + L_p (dy - p dx)
    theta = s sqrt(L L_pp) (dy - p dx)

The third form eta and the scalars S, C, K are recovered numerically from the
structure equations

    d omega = eta ^ theta
    d theta = -eta ^ (omega + S theta)
    d eta   = -(K omega + C eta) ^ theta

with exterior derivatives taken by central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp
from scipy import optimize

TWO_PI = 2.0 * math.pi
MAX_RANDERS_EPS = 0.05
ROTATED_CHART_THRESHOLD = 0.3
DEFAULT_STEP = 1e-4

# sampling window used for validation of shipped models
WINDOW_X = (-1.0, 1.0)
WINDOW_Y = (0.5, 2.0)


class ValidationError(ValueError):
    pass


class ModelInvalidError(ValueError):
    pass


class FrameError(RuntimeError):
    pass


class ChartError(RuntimeError):
    pass


class DegenerateSupportError(RuntimeError):
    pass


_X, _Y, _U1, _U2, _P = sp.symbols("x y u1 u2 p", real=True)


def _bump(amp: float):
    return amp * (1 + _X * (_Y - 1)) * sp.exp(-(_X**2 + (_Y - 1) ** 2) / 2)


# catalogue of one-forms beta for Randers models, as (beta_x, beta_y)
def _beta_magnetic():
    g = sp.exp(-sp.log(_Y) ** 2)
    return ((1 + sp.sin(_X) * g / 2) / _Y, sp.cos(_X) * g / (2 * _Y))


def _beta_closed():
    sigma = sp.log(_Y) + sp.Rational(1, 5) * _X / (1 + _X**2)
    return (sp.diff(sigma, _X), sp.diff(sigma, _Y))


BETAS = {"magnetic": _beta_magnetic, "closed": _beta_closed}
def _angular_mode(m: int):
    """(cos m phi, sin m phi) of the direction (u1, u2) as symbolic expressions."""
    z = sp.expand((_U1 + sp.I * _U2) ** m)
    r = sp.sqrt(_U1**2 + _U2**2) ** m
    return sp.re(z) / r, sp.im(z) / r


KINDS = ("hyperbolic", "conformal", "randers", "hkvariation")
_PARAM_DEFAULTS = {
    "hyperbolic": {},
    "conformal": {"amp": 0.1},
    "randers": {"eps": 0.01, "beta": "magnetic"},
    # hyperbolic norm scaled by 1 + eps*u with u = -y^m (a1 sin m phi + a2 cos m phi)
    "hkvariation": {"m": 2, "a1": 1.0, "a2": 0.0, "eps": 0.001},
}
MAX_VARIATION_EPS = 0.01


@dataclass(frozen=True)
class FinslerModel:
    """Surface model addressed by a catalogue id such as ``randers:eps=0.01``."""

    kind: str = "hyperbolic"
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        allowed = _PARAM_DEFAULTS[self.kind]
        merged = dict(allowed)
        for key, value in self.params:
            if key not in allowed:
                raise ValidationError(f"unknown parameter {key!r} for {self.kind}")
            merged[key] = value
        if self.kind == "randers":
            eps = float(merged["eps"])
            if not 0.0 <= abs(eps) <= MAX_RANDERS_EPS:
                raise ValidationError(f"|eps| must be <= {MAX_RANDERS_EPS}")
            if merged["beta"] not in BETAS:
                raise ValidationError(f"unknown beta {merged['beta']!r}")
            merged["eps"] = eps
        if self.kind == "hkvariation":
            m = merged["m"]
            if float(m) != int(m) or not 1 <= int(m) <= 8:
                raise ValidationError("hkvariation degree m must be an integer in 1..8")
            merged["m"] = int(m)
            for key in ("a1", "a2", "eps"):
                merged[key] = float(merged[key])
            if abs(merged["eps"]) > MAX_VARIATION_EPS:
                raise ValidationError(f"|eps| must be <= {MAX_VARIATION_EPS}")
        if self.kind == "conformal":
            merged["amp"] = float(merged["amp"])
            if abs(merged["amp"]) > 0.25:
                raise ValidationError("conformal amp must be <= 0.25")
        object.__setattr__(self, "params", tuple(sorted(merged.items())))

    def param(self, key):
        return dict(self.params)[key]

    @property
    def model_id(self) -> str:
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v}" for k, v in self.params)

    @property
    def riemannian(self) -> bool:
        if self.kind == "hkvariation":
            return self.param("eps") == 0.0
        return self.kind != "randers" or self.param("eps") == 0.0

    def norm_expr(self):
        euclid = sp.sqrt(_U1**2 + _U2**2) / _Y
        if self.kind == "hyperbolic":
            return euclid
        if self.kind == "conformal":
            return sp.exp(_bump(self.param("amp"))) * euclid
        if self.kind == "hkvariation":
            m = self.param("m")
            cos_m, sin_m = _angular_mode(m)
            a1, a2 = (sp.nsimplify(self.param(k)) for k in ("a1", "a2"))
            u = -(_Y**m) * (a1 * sin_m + a2 * cos_m)
            return euclid * (1 + sp.nsimplify(self.param("eps")) * u)
        bx, by = BETAS[self.param("beta")]()
        return euclid + sp.nsimplify(self.param("eps")) * (bx * _U1 + by * _U2)

    def norm(self, x, y, u1, u2) -> float:
        return _compiled(self).norm(x, y, u1, u2)


def parse_model(text: str) -> FinslerModel:
    """Parse ``kind`` or ``kind:key=value,key=value``."""
    text = text.strip()
    kind, _, rest = text.partition(":")
    params = []
    if rest:
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValidationError(f"bad model parameter {item!r}")
            key = key.strip()
            value = value.strip()
            try:
                params.append((key, float(value)))
            except ValueError:
                params.append((key, value))
    return FinslerModel(kind.strip(), tuple(params))


CATALOG = (
    "hyperbolic",
    "conformal:amp=0.1",
    "randers:eps=0.01",
    "randers:eps=0.02",
    "randers:beta=closed,eps=0.02",
)


@dataclass(frozen=True)
class Chart:
    """Slope chart: direction s*(1, p), or s*(q, 1) when ``swapped``."""

    swapped: bool = False
    sign: int = 1


def chart_for(phi: float) -> tuple[Chart, float]:
    c, s = math.cos(phi), math.sin(phi)
    if abs(c) >= ROTATED_CHART_THRESHOLD:
        return Chart(False, 1 if c > 0 else -1), s / c
    return Chart(True, 1 if s > 0 else -1), c / s


@dataclass
class _Compiled:
    norm: Callable
    charts: dict = field(default_factory=dict)
    jets: dict = field(default_factory=dict)


@lru_cache(maxsize=32)
def _compiled(model: FinslerModel) -> _Compiled:
    expr = model.norm_expr()
    out = _Compiled(norm=sp.lambdify((_X, _Y, _U1, _U2), expr, "math"))
    for swapped in (False, True):
        for sign in (1, -1):
            if swapped:
                lag = expr.subs({_U1: sign * _P, _U2: sign})
            else:
                lag = expr.subs({_U1: sign, _U2: sign * _P})
            lp = sp.diff(lag, _P)
            lpp = sp.diff(lp, _P)
            parts = (lag, lp, lpp, sp.diff(lag, _X), sp.diff(lag, _Y), sp.diff(lp, _X), sp.diff(lp, _Y))
            out.charts[Chart(swapped, sign)] = sp.lambdify((_X, _Y, _P), parts, "math")
            extra = (sp.diff(lpp, _X), sp.diff(lpp, _Y), sp.diff(lpp, _P))
            out.jets[Chart(swapped, sign)] = sp.lambdify((_X, _Y, _P), parts + extra, "math")
    return out


@dataclass(frozen=True)
class FinslerValues:
    L: float
    Lp: float
    Lpp: float
    Lx: float
    Ly: float
    Lpx: float
    Lpy: float


def eval_finsler(model: FinslerModel, x: float, y: float, p: float, chart: Chart = Chart()) -> FinslerValues:
    if not y > 0:
        raise ValidationError(f"need y > 0, got {y}")
    vals = FinslerValues(*(float(v) for v in _compiled(model).charts[chart](x, y, p)))
    if not vals.L > 0 or not vals.L * vals.Lpp > 0:
        raise ModelInvalidError(f"{model.model_id} not convex at ({x}, {y}, {p})")
    return vals


@dataclass(frozen=True)
class UPoint:
    x: float
    y: float
    phi: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValidationError(f"need y > 0, got {self.y}")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)

    def as_array(self):
        return np.array([self.x, self.y, self.phi])


def omega_theta(model: FinslerModel, x: float, y: float, phi: float):
    """Coframe forms omega, theta as (dx, dy, dphi) components."""
    chart, p = chart_for(phi)
    v = eval_finsler(model, x, y, p, chart)
    s = chart.sign
    root = math.sqrt(v.L * v.Lpp)
    if chart.swapped:
        # same formulas with the roles of x and y exchanged; the exchange
        # reverses orientation, hence the sign on theta
        omega = np.array([s * v.Lp, s * (v.L - p * v.Lp), 0.0])
        theta = -s * root * np.array([1.0, -p, 0.0])
    else:
        omega = np.array([s * (v.L - p * v.Lp), s * v.Lp, 0.0])
        theta = s * root * np.array([-p, 1.0, 0.0])
    return omega, theta


def omega_theta_jet(model: FinslerModel, x: float, y: float, phi: float):
    """omega, theta and their coordinate gradients ``g[i, j] = d_j a_i``.

    Derivatives come from the symbolic Lagrangian; d/dphi enters through
    dp/dphi = 1 + p^2 (or -(1 + q^2) in the rotated chart).
    """
    chart, p = chart_for(phi)
    L, Lp, Lpp, Lx, Ly, Lpx, Lpy, Lppx, Lppy, Lppp = (float(v) for v in _compiled(model).jets[chart](x, y, p))
    if not L > 0 or not L * Lpp > 0:
        raise ModelInvalidError(f"{model.model_id} not convex at ({x}, {y}, {p})")
    s = chart.sign
    dp = -(1 + p * p) if chart.swapped else 1 + p * p
    root = math.sqrt(L * Lpp)
    # gradients (d_x, d_y, d_p) of the scalar pieces
    g_a = np.array([Lx - p * Lpx, Ly - p * Lpy, -p * Lpp])  # L - p L_p
    g_b = np.array([Lpx, Lpy, Lpp])  # L_p
    g_r = np.array([Lx * Lpp + L * Lppx, Ly * Lpp + L * Lppy, Lp * Lpp + L * Lppp]) / (2 * root)
    g_p = np.array([0.0, 0.0, 1.0])
    chain = np.array([1.0, 1.0, dp])
    if chart.swapped:
        omega = np.array([s * Lp, s * (L - p * Lp), 0.0])
        theta = -s * root * np.array([1.0, -p, 0.0])
        g_omega = s * np.vstack([g_b, g_a, np.zeros(3)])
        g_theta = -s * np.vstack([g_r, -(g_r * p + root * g_p), np.zeros(3)])
    else:
        omega = np.array([s * (L - p * Lp), s * Lp, 0.0])
        theta = s * root * np.array([-p, 1.0, 0.0])
        g_omega = s * np.vstack([g_a, g_b, np.zeros(3)])
        g_theta = s * np.vstack([-(g_r * p + root * g_p), g_r, np.zeros(3)])
    return omega, theta, g_omega * chain, g_theta * chain


def _curl(grads: np.ndarray) -> np.ndarray:
    return np.array(
        [
            grads[1, 0] - grads[0, 1],
            grads[2, 0] - grads[0, 2],
            grads[2, 1] - grads[1, 2],
        ]
    )


def _exterior(form_at, point: np.ndarray, h: float) -> np.ndarray:
    """d of a 1-form field as (xy, xphi, yphi) components, central differences."""
    grads = np.zeros((3, 3))  # grads[i, j] = d_j a_i
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        grads[:, j] = (form_at(point + e) - form_at(point - e)) / (2 * h)
    return _curl(grads)


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Wedge of 1-forms in (xy, xphi, yphi) components."""
    return np.array(
        [
            a[0] * b[1] - a[1] * b[0],
            a[0] * b[2] - a[2] * b[0],
            a[1] * b[2] - a[2] * b[1],
        ]
    )


def _wedge_matrix(b: np.ndarray) -> np.ndarray:
    """Matrix M with M @ a = a ^ b."""
    return np.array(
        [
            [b[1], -b[0], 0.0],
            [b[2], 0.0, -b[0]],
            [0.0, b[2], -b[1]],
        ]
    )


def _solve_eta(omega, theta, d_omega, d_theta):
    """Least squares for (eta, S) from the first two structure equations."""
    rows = np.zeros((6, 4))
    rhs = np.concatenate([d_omega, d_theta])
    rows[:3, :3] = _wedge_matrix(theta)
    # d theta = -eta ^ omega - S d omega
    rows[3:, :3] = -_wedge_matrix(omega)
    rows[3:, 3] = -d_omega
    sol, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    resid = rows @ sol - rhs
    if not abs(sol[2]) > 1e-12:
        raise FrameError("degenerate coframe: eta has no fibre component")
    return sol[:3], sol[3], resid


DERIVATIVES = ("fd", "analytic")


def _first_order(model, q, h, derivatives):
    """omega, theta, d omega, d theta at q by the chosen derivative route."""
    if derivatives == "analytic":
        o, t, g_o, g_t = omega_theta_jet(model, *q)
        return o, t, _curl(g_o), _curl(g_t)
    if derivatives != "fd":
        raise ValueError(f"derivatives must be one of {DERIVATIVES}")
    o, t = omega_theta(model, *q)
    d_o = _exterior(lambda r: omega_theta(model, *r)[0], q, h)
    d_t = _exterior(lambda r: omega_theta(model, *r)[1], q, h)
    return o, t, d_o, d_t


def eta_at(model: FinslerModel, q, h: float = DEFAULT_STEP, derivatives: str = "fd"):
    o, t, d_o, d_t = _first_order(model, np.asarray(q, dtype=float), h, derivatives)
    return _solve_eta(o, t, d_o, d_t)


@dataclass(frozen=True)
class FrameData:
    Xvec: np.ndarray
    Yvec: np.ndarray
    Zvec: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    S: float
    C: float
    K: float
    residuals: tuple = (0.0, 0.0, 0.0)

    def coframe_matrix(self) -> np.ndarray:
        return np.vstack([self.omega, self.theta, self.eta])

    def frame_matrix(self) -> np.ndarray:
        return np.column_stack([self.Xvec, self.Yvec, self.Zvec])

    def duality_residual(self) -> float:
        return float(np.max(np.abs(self.coframe_matrix() @ self.frame_matrix() - np.eye(3))))


def hyperbolic_frame(u: UPoint) -> FrameData:
    """Closed-form frame of the hyperbolic metric."""
    c, s = math.cos(u.phi), math.sin(u.phi)
    y = u.y
    return FrameData(
        Xvec=np.array([y * c, y * s, -c]),
        Yvec=np.array([-y * s, y * c, s]),
        Zvec=np.array([0.0, 0.0, 1.0]),
        omega=np.array([c / y, s / y, 0.0]),
        theta=np.array([-s / y, c / y, 0.0]),
        eta=np.array([1.0 / y, 0.0, 1.0]),
        S=0.0,
        C=0.0,
        K=-1.0,
    )


def frame_and_coframe(
    model: FinslerModel, u: UPoint, h: float = DEFAULT_STEP, derivatives: str = "fd"
) -> FrameData:
    """Frame, coframe and (S, C, K) with eta solved from the structure equations.

    ``derivatives="fd"`` differentiates the coframe by central differences;
    ``"analytic"`` uses the symbolic jets of the Lagrangian for d omega and
    d theta. d eta is a central difference of the solved eta in both cases.
    """
    q = u.as_array()
    o, t, d_o, d_t = _first_order(model, q, h, derivatives)
    eta, S, resid12 = _solve_eta(o, t, d_o, d_t)
    d_eta = _exterior(lambda r: eta_at(model, r, h, derivatives)[0], q, h)
    # d eta = -K omega^theta - C d omega
    rows = np.column_stack([-wedge(o, t), -d_o])
    kc, *_ = np.linalg.lstsq(rows, d_eta, rcond=None)
    resid3 = rows @ kc - d_eta
    cof = np.vstack([o, t, eta])
    try:
        frame = np.linalg.inv(cof)
    except np.linalg.LinAlgError as exc:
        raise FrameError("singular coframe") from exc
    residuals = (
        float(np.linalg.norm(resid12[:3])),
        float(np.linalg.norm(resid12[3:])),
        float(np.linalg.norm(resid3)),
    )
    return FrameData(frame[:, 0], frame[:, 1], frame[:, 2], o, t, eta, float(S), float(kc[1]), float(kc[0]), residuals)


def structure_residuals(model: FinslerModel, u: UPoint, h: float, reference_step: float = 1e-3) -> tuple:
    """Residuals of the three structure equations with derivatives at step h.

    eta, S, C, K are frozen from a reference solve, so the residuals measure
    only the truncation error of the step-h exterior derivatives.
    """
    q = u.as_array()
    ref = frame_and_coframe(model, u, reference_step)
    d_o = _exterior(lambda r: omega_theta(model, *r)[0], q, h)
    d_t = _exterior(lambda r: omega_theta(model, *r)[1], q, h)
    d_e = _exterior(lambda r: eta_at(model, r, reference_step)[0], q, h)
    o, t, e = ref.omega, ref.theta, ref.eta
    r1 = d_o - wedge(e, t)
    r2 = d_t + wedge(e, o + ref.S * t)
    r3 = d_e + wedge(ref.K * o + ref.C * e, t)
    return tuple(float(np.linalg.norm(r)) for r in (r1, r2, r3))


def frame_fast(model: FinslerModel, u: UPoint, h: float = DEFAULT_STEP) -> FrameData:
    """Closed form for the hyperbolic model, analytic-jet structure solve otherwise."""
    if model.kind == "hyperbolic":
        return hyperbolic_frame(u)
    return frame_and_coframe(model, u, h, "analytic")


def frame_vectors(model: FinslerModel, q: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """Columns X, Y, Z at coordinates q = (x, y, phi), without K and C."""
    x, y, phi = q
    if model.kind == "hyperbolic":
        return hyperbolic_frame(UPoint(x, y, phi)).frame_matrix()
    o, t, d_o, d_t = _first_order(model, np.asarray(q, dtype=float), h, "analytic")
    eta, _, _ = _solve_eta(o, t, d_o, d_t)
    return np.linalg.inv(np.vstack([o, t, eta]))

def bracket_structure(model: FinslerModel, u: UPoint, h: float = 1e-4) -> dict:
    """S, C, K read off from Lie brackets of the frame fields.

    [Z, X] = Y, [Z, Y] = -X + S Y + C Z, [X, Y] = K Z. Independent of the
    coframe solve for d eta.
    """
    q = u.as_array()
    frame = frame_vectors(model, q, h)
    jac = np.zeros((3, 3, 3))  # jac[k][:, j] = d_j of column k
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        diff = (frame_vectors(model, q + e, h) - frame_vectors(model, q - e, h)) / (2 * h)
        for k in range(3):
            jac[k][:, j] = diff[:, k]

    def bracket(a, b):
        return jac[b] @ frame[:, a] - jac[a] @ frame[:, b]

    coframe = np.linalg.inv(frame)
    zx = coframe @ bracket(2, 0)
    zy = coframe @ bracket(2, 1)
    xy = coframe @ bracket(0, 1)
    return {"S": float(zy[1]), "C": float(zy[2]), "K": float(xy[2]), "ZX": zx, "ZY": zy, "XY": xy}


@dataclass(frozen=True)
class DualPoint:
    xi1: float
    xi2: float


def dual_embedding(model: FinslerModel, u: UPoint, chart: Chart | None = None) -> DualPoint:
    """Unit covector (L - p L_p, L_p) of the direction phi."""
    if chart is None:
        chart, p = chart_for(u.phi)
    else:
        c, s = math.cos(u.phi), math.sin(u.phi)
        denom = s if chart.swapped else c
        if abs(denom) < 1e-12 or (1 if denom > 0 else -1) != chart.sign:
            raise ChartError(f"direction {u.phi} not covered by {chart}")
        p = c / s if chart.swapped else s / c
    v = eval_finsler(model, u.x, u.y, p, chart)
    a, b = v.L - p * v.Lp, v.Lp
    if chart.swapped:
        a, b = b, a
    return DualPoint(chart.sign * a, chart.sign * b)


def dual_norm(model: FinslerModel, x: float, y: float, xi1: float, xi2: float, samples: int = 720) -> float:
    """sup of xi(u)/F(u) over directions."""
    norm = _compiled(model).norm

    def neg(ang):
        c, s = math.cos(ang), math.sin(ang)
        return -(xi1 * c + xi2 * s) / norm(x, y, c, s)

    grid = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    vals = [neg(a) for a in grid]
    i = int(np.argmin(vals))
    step = TWO_PI / samples
    res = optimize.minimize_scalar(neg, bounds=(grid[i] - step, grid[i] + step), method="bounded", options={"xatol": 1e-12})
    return -float(res.fun)


def variation_of_L(model: FinslerModel, delta_a: Callable, delta_b: Callable) -> Callable:
    """u = dL/L for a variation (delta_a dx + delta_b dy) of the canonical 1-form.

    Along the maximising fibre point the change in the support function is
    delta_a + delta_b p; dividing by L makes it chart free.
    """
    norm = _compiled(model).norm

    def u_field(x, y, phi):
        chart, p = chart_for(phi)
        v = eval_finsler(model, x, y, p, chart)
        if not v.Lpp > 1e-12:
            raise DegenerateSupportError("maximiser is not transverse")
        c, s = math.cos(phi), math.sin(phi)
        return (delta_a(x, y, phi) * c + delta_b(x, y, phi) * s) / norm(x, y, c, s)

    return u_field


def boundary_variation(m: int, a1: float, a2: float):
    """Coefficients (delta_a, delta_b) of the fold-boundary variation for a*dz^m
    with constant a = a1 + i a2."""

    def delta_a(x, y, phi):
        k = (m - 1) * phi
        return y ** (m - 1) * (a1 * math.cos(k) - a2 * math.sin(k))

    def delta_b(x, y, phi):
        k = (m - 1) * phi
        return -(y ** (m - 1)) * (a1 * math.sin(k) + a2 * math.cos(k))

    return delta_a, delta_b


def validate_model(model: FinslerModel, n: int = 25, seed: int = 0) -> dict:
    """Sampled positivity, convexity and K < 0 over the window."""
    rng = np.random.default_rng(seed)
    worst_k = -math.inf
    worst_convex = math.inf
    for _ in range(n):
        u = UPoint(rng.uniform(*WINDOW_X), rng.uniform(*WINDOW_Y), rng.uniform(0, TWO_PI))
        chart, p = chart_for(u.phi)
        v = eval_finsler(model, u.x, u.y, p, chart)
        worst_convex = min(worst_convex, v.L * v.Lpp)
        worst_k = max(worst_k, frame_fast(model, u).K)
    return {"max_K": worst_k, "min_convexity": worst_convex, "ok": worst_k < 0 and worst_convex > 0}
