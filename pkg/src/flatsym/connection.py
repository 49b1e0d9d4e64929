"""The flat symplectic connection on U x R, its parallel transport, Crofton
length recovery and the averaging with the involution f2 -> -f2.

Two-forms on M = U x R are stored as antisymmetric 4x4 matrices in the basis
(omega, theta, eta, dt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flows import (
    JacobiFunctions,
    TransportCoefficients,
    flow_map,
    integrate,
    transport_coefficients,
)
from .metrics import FinslerModel, FrameData, UPoint, ValidationError, frame_fast

TWO_PI = 2.0 * math.pi


class TransportError(RuntimeError):
    pass


class RangeError(RuntimeError):
    pass


def two_form(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """Matrix of a ^ b for 1-forms a, b in the (omega, theta, eta, dt) basis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.outer(a, b) - np.outer(b, a)


def top_coefficient(a: np.ndarray, b: np.ndarray) -> float:
    """Coefficient of omega^theta^eta^dt in a ^ b."""
    return (
        a[0, 1] * b[2, 3]
        - a[0, 2] * b[1, 3]
        + a[0, 3] * b[1, 2]
        + a[1, 2] * b[0, 3]
        - a[1, 3] * b[0, 2]
        + a[2, 3] * b[0, 1]
    )


@dataclass
class ConnectionForm:
    point: UPoint
    t: float
    coefficients: TransportCoefficients
    frame: FrameData
    matrix: np.ndarray

    @property
    def fiber_density(self) -> float:
        return -self.coefficients.f2p

    def self_wedge(self) -> float:
        return top_coefficient(self.matrix, self.matrix)

    def coordinate_matrix(self) -> np.ndarray:
        """Components in (dx, dy, dphi, dt)."""
        basis = np.zeros((4, 4))
        basis[:3, :3] = self.frame.coframe_matrix()
        basis[3, 3] = 1.0
        return basis.T @ self.matrix @ basis

    def potential(self) -> tuple:
        return self.coefficients.f1, self.coefficients.f2


def alpha_matrix(k: TransportCoefficients) -> np.ndarray:
    """-(f1' omega + f2' eta) ^ (theta + dt + c omega + e eta)."""
    return -two_form([k.f1p, 0.0, k.f2p, 0.0], [k.c, 1.0, k.e, 1.0])


def alpha_at(
    model: FinslerModel,
    u: UPoint,
    t: float,
    tol: float = 1e-10,
    theta_rate_sign: int = 1,
) -> ConnectionForm:
    k = transport_coefficients(model, u.as_array(), t, tol, theta_rate_sign)
    return ConnectionForm(u, t, k, frame_fast(model, u), alpha_matrix(k))


@dataclass
class Path:
    """A curve in the half-plane with position and velocity as functions of s."""

    position: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]
    length: float
    breaks: tuple = ()
    # straight between breaks, so a piece can be evaluated from its midpoint
    piecewise_linear: bool = False


def polyline(points: Sequence[Sequence[float]]) -> Path:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValidationError("polyline needs at least two (x, y) points")
    if np.any(pts[:, 1] <= 0):
        raise ValidationError("polyline must stay in y > 0")
    n = len(pts) - 1

    def seg(s):
        i = min(int(math.floor(s)), n - 1)
        return i, s - i

    def position(s):
        i, r = seg(s)
        return pts[i] + r * (pts[i + 1] - pts[i])

    def velocity(s):
        i, _ = seg(s)
        return pts[i + 1] - pts[i]

    return Path(position, velocity, float(n), tuple(range(1, n)), piecewise_linear=True)


def y_line_path(model: FinslerModel, u: UPoint, s_end: float, tol: float = 1e-11) -> Path:
    """Projection of the Y-orbit through u."""

    def state(s):
        return flow_map(model, "Y", u.as_array(), s, tol)

    def position(s):
        return state(s)[:2]

    def velocity(s):
        q = state(s)
        return frame_fast(model, UPoint(*q)).Yvec[:2]

    return Path(position, velocity, s_end)


def horizontal_lift_rates(
    frame: FrameData, k: TransportCoefficients, base_velocity: np.ndarray
) -> tuple[float, float]:
    """(dphi/ds, dt/ds) of the lift annihilated by alpha.

    alpha = -A ^ B is decomposable, so the lift W solves A(W) = 0 and
    B(W) = 0; the unknowns are the fibre components along d/dphi and d/dt.
    """
    w0 = np.array([base_velocity[0], base_velocity[1], 0.0])
    om, th, et = frame.omega @ w0, frame.theta @ w0, frame.eta @ w0
    eta_phi = frame.eta[2]
    # [[f2' eta_phi, 0], [e eta_phi, 1]] (a, b) = (-f1' om - f2' et, -th - c om - e et)
    system = np.array([[k.f2p * eta_phi, 0.0], [k.e * eta_phi, 1.0]])
    rhs = np.array([-k.f1p * om - k.f2p * et, -th - k.c * om - k.e * et])
    if abs(np.linalg.det(system)) < 1e-14:
        raise TransportError("horizontal lift is singular")
    a, b = np.linalg.solve(system, rhs)
    return a, b


def parallel_transport(
    model: FinslerModel,
    path: Path,
    fiber_start: tuple[float, float],
    tol: float = 1e-8,
    theta_rate_sign: int = 1,
) -> tuple[float, float]:
    """Transport (phi, t) along the path; phi is returned unwrapped."""
    if path.length == 0:
        return tuple(fiber_start)
    inner_tol = min(1e-10, tol * 1e-2)

    def rhs(position, velocity, s, state):
        x, y = position(s)
        q = np.array([x, y, state[0]])
        frame = frame_fast(model, UPoint(*q))
        k = transport_coefficients(model, q, state[1], inner_tol, theta_rate_sign)
        return np.array(horizontal_lift_rates(frame, k, velocity(s)))

    state = np.array(fiber_start, dtype=float)
    # restart at corners; a stage landing exactly on a corner must still see
    # the velocity of its own piece
    knots = [0.0, *path.breaks, path.length]
    for s0, s1 in zip(knots[:-1], knots[1:]):
        if path.piecewise_linear:
            mid = 0.5 * (s0 + s1)
            p_mid, v_mid = path.position(mid), path.velocity(mid)
            position = lambda s, p=p_mid, v=v_mid, c=mid: p + (s - c) * v  # noqa: E731
            velocity = lambda s, v=v_mid: v  # noqa: E731
        else:
            position, velocity = path.position, path.velocity
        sol = integrate(lambda s, y: rhs(position, velocity, s0 + s, y), state, s1 - s0, tol)
        state = sol.ys[-1]
    return float(state[0]), float(state[1])


def _wrap(angle: float) -> float:
    return (angle + math.pi) % TWO_PI - math.pi


def holonomy_loop(
    model: FinslerModel,
    loop: Sequence[Sequence[float]],
    probes: Sequence[tuple[float, float]],
    tol: float = 1e-8,
    theta_rate_sign: int = 1,
) -> float:
    """Largest fibre displacement after transporting each probe around the loop."""
    pts = np.asarray(loop, dtype=float)
    if not np.allclose(pts[0], pts[-1]):
        raise ValidationError("loop must be closed")
    if np.all(pts == pts[0]):
        return 0.0
    path = polyline(pts)
    worst = 0.0
    for phi0, t0 in probes:
        phi1, t1 = parallel_transport(model, path, (phi0, t0), tol, theta_rate_sign)
        worst = max(worst, math.hypot(_wrap(phi1 - phi0), t1 - t0))
    return worst


def square_loop(corner=(-0.5, 0.5), side: float = 1.0) -> list:
    x0, y0 = corner
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side), (x0, y0)]


def default_probes(n: int = 20, t_scale: float = 1.0) -> list:
    return [(TWO_PI * i / n, t_scale * math.sin(2.0 * i + 0.5)) for i in range(n)]


# --- Crofton -----------------------------------------------------------------


def hyperbolic_distance(a, b) -> float:
    (x1, y1), (x2, y2) = a, b
    return math.acosh(1.0 + ((x1 - x2) ** 2 + (y1 - y2) ** 2) / (2.0 * y1 * y2))


def _rotation(z, angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return (c * z + s) / (-s * z + c)


def hyperbolic_y_flow(x0: float, y0: float, phi, t):
    """psi_t(x0, y0, phi) for the hyperbolic metric, vectorised.

    Y moves the base point along the unit-speed geodesic with initial angle
    phi + pi/2 and keeps phi equal to that tangent angle minus pi/2.
    """
    phi = np.asarray(phi, dtype=float)
    t = np.asarray(t, dtype=float)
    # rotating about i by phi takes the upward vertical to angle phi + pi/2
    w = 1j * np.exp(t)
    z = _rotation(w, phi)
    dz = w / (-np.sin(phi / 2) * w + np.cos(phi / 2)) ** 2
    point = x0 + y0 * z
    angle = np.angle(dz) - math.pi / 2
    return point.real, point.imag, angle


def _side(px, py, x1, y1, phi1):
    """Sign of a point relative to the geodesic through (x1, y1) with angle phi1."""
    c, s = np.cos(phi1), np.sin(phi1)
    return c * (px**2 + py**2 - x1**2 - y1**2) - 2.0 * (x1 * c + y1 * s) * (px - x1)


def crosses_segment(a, b, x1, y1, phi1):
    """True where the oriented geodesic through (x1, y1, phi1) has a on its
    positive side and b on its negative side.

    Each unoriented crossing geodesic appears once per orientation; keeping
    one orientation selects one of the two bounded regions cut out by the
    circles of geodesics through a and through b.
    """
    sa = _side(a[0], a[1], x1, y1, phi1)
    sb = _side(b[0], b[1], x1, y1, phi1)
    return (sa > 0) & (sb < 0)


CHUNK = 1 << 16


def _uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniform draws for samples [start, start + count) keyed by (seed, chunk)."""
    out = np.empty((count, width))
    done = 0
    while done < count:
        index = start + done
        chunk, offset = divmod(index, CHUNK)
        gen = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, chunk]))
        block = gen.random((CHUNK, width))
        take = min(CHUNK - offset, count - done)
        out[done : done + take] = block[offset : offset + take]
        done += take
    return out


@dataclass
class CroftonResult:
    d_true: float
    estimate: float
    stderr: float
    n: int
    seed: int
    window: float
    tail_bound: float = 0.0


def crofton_measure(
    model: FinslerModel,
    x: Sequence[float],
    y: Sequence[float],
    n_samples: int,
    seed: int = 0,
    margin: float = 8.0,
    inner_fraction: float = 0.95,
) -> CroftonResult:
    """Monte Carlo area of {geodesics meeting [x, y]} under cosh t dt dphi.

    Geodesics are charted at base x by (phi, t): the X-orbit through
    psi_t(x, phi). The window is |t| <= d + margin. Samples come from a
    mixture: with probability ``inner_fraction`` t has density proportional
    to cosh t on |t| <= d + 1/2, otherwise t is uniform on the full window;
    phi is uniform. Weights make the estimator unbiased on the whole window.
    """
    if model.kind != "hyperbolic":
        raise ValidationError("Crofton sampling is implemented for the hyperbolic model")
    if n_samples < 100:
        raise ValidationError("need at least 100 samples")
    a = (float(x[0]), float(x[1]))
    b = (float(y[0]), float(y[1]))
    if a[1] <= 0 or b[1] <= 0:
        raise ValidationError("points must lie in y > 0")
    d = hyperbolic_distance(a, b)
    window = d + margin
    if d == 0.0:
        return CroftonResult(0.0, 0.0, 0.0, n_samples, seed, window)
    inner = d + 0.5
    sinh_inner = math.sinh(inner)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        count = min(CHUNK, n_samples - done)
        draws = _uniforms(seed, done, count, 3)
        use_inner = draws[:, 0] < inner_fraction
        v = 2.0 * draws[:, 1] - 1.0
        t = np.where(use_inner, np.arcsinh(v * sinh_inner), v * window)
        phi = TWO_PI * draws[:, 2]
        density = (
            inner_fraction * (np.abs(t) <= inner) * np.cosh(t) / (2.0 * sinh_inner)
            + (1.0 - inner_fraction) / (2.0 * window)
        )
        px, py, pphi = hyperbolic_y_flow(a[0], a[1], phi, t)
        hit = crosses_segment(a, b, px, py, pphi)
        w = np.where(hit, TWO_PI * np.cosh(t) / density, 0.0)
        total += float(w.sum())
        total_sq += float((w * w).sum())
        done += count
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    # a geodesic at signed distance |t| > d from x cannot meet [x, y], so
    # truncating to the window loses nothing
    return CroftonResult(d, mean, math.sqrt(var / n_samples), n_samples, seed, window, 0.0)


# --- reduction to the involution f2 -> -f2 -------------------------------------


def bisect_tau(f2: Callable[[float], float], t: float, bound: float, tol: float = 1e-12) -> float:
    """Solve f2(tau) = -f2(t) for decreasing f2 on [-bound, bound]."""
    if t == 0:
        return 0.0
    target = -f2(t)
    lo, hi = (0.0, bound) if t < 0 else (-bound, 0.0)
    g_lo, g_hi = f2(lo) - target, f2(hi) - target
    if g_lo * g_hi > 0:
        raise RangeError(f"f2 does not reach {target} within +-{bound}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = f2(mid) - target
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class ReductionData:
    anchor: UPoint
    tau: Callable[[float], float]
    F1: Callable[[float], float]
    lam: Callable[[float], float]
    horizontality_residual_at_0: float
    functions: JacobiFunctions = field(repr=False)


class _Reducer:
    """Jacobi data at the anchor and at offset anchors for frame derivatives."""

    def __init__(self, model, anchor: UPoint, half_width: float, step: float = 1e-4, tol: float = 1e-11):
        self.model = model
        self.anchor = anchor
        self.step = step
        self.half_width = half_width
        self.center = JacobiFunctions(model, anchor, half_width, tol)
        self.frame = frame_fast(model, anchor)
        self.offsets = []
        q = anchor.as_array()
        vectors = self.frame.frame_matrix()
        for j in range(3):
            pair = []
            for sgn in (1, -1):
                p = q + sgn * step * vectors[:, j]
                pair.append(JacobiFunctions(model, UPoint(*p), half_width, tol))
            self.offsets.append(pair)

    def tau(self, fn: JacobiFunctions, t: float) -> float:
        return bisect_tau(fn.f2, t, self.half_width)

    def g(self, fn: JacobiFunctions, t: float) -> float:
        """tau* f1 = f1(tau(t))."""
        return fn.f1(self.tau(fn, t))

    def frame_derivative(self, func: Callable[[JacobiFunctions], float]) -> np.ndarray:
        """(X, Y, Z) derivatives at fixed t by central differences across anchors."""
        return np.array([(func(p) - func(m)) / (2 * self.step) for p, m in self.offsets])

    def exact_potential_form(self, p_func, q_func, p_t: float, q_t: float) -> np.ndarray:
        """d(P omega + Q eta) with P, Q given as functions of the anchor."""
        fr = self.frame
        p = p_func(self.center)
        qv = q_func(self.center)
        dp = np.concatenate([self.frame_derivative(p_func), [p_t]])
        dq = np.concatenate([self.frame_derivative(q_func), [q_t]])
        omega = np.array([1.0, 0.0, 0.0, 0.0])
        eta = np.array([0.0, 0.0, 1.0, 0.0])
        theta = np.array([0.0, 1.0, 0.0, 0.0])
        d_omega = two_form(eta, theta)
        d_eta = -two_form(fr.K * omega + fr.C * eta, theta)
        return two_form(dp, omega) + p * d_omega + two_form(dq, eta) + qv * d_eta

    def alphas(self, t: float):
        """(alpha1, alpha2, alpha0) at (anchor, t)."""
        c = self.center
        f1, f2, f1p, f2p = c.values(t)
        tau = self.tau(c, t)
        _, _, f1p_tau, f2p_tau = c.values(tau)
        tau_rate = -f2p / f2p_tau
        alpha1 = self.exact_potential_form(lambda fn: fn.f1(t), lambda fn: fn.f2(t), f1p, f2p)
        # alpha2 = -tau* alpha = d(-(tau* f1) omega + f2 eta)
        alpha2 = self.exact_potential_form(
            lambda fn: -self.g(fn, t), lambda fn: fn.f2(t), -f1p_tau * tau_rate, f2p
        )
        alpha0 = two_form([1.0, 0, 0, 0], [0, 1.0, 0, 0])
        return alpha1, alpha2, alpha0

    def lam(self, t: float) -> float:
        a1, a2, a0 = self.alphas(t)
        return top_coefficient(a1, a2) / (2.0 * top_coefficient(a0, a1))

    def horizontality(self, t: float = 0.0) -> float:
        a1, a2, a0 = self.alphas(t)
        lam = top_coefficient(a1, a2) / (2.0 * top_coefficient(a0, a1))
        avg = a1 + a2 - lam * a0
        # rows 0 and 1 are the contractions with X and Y
        return float(np.max(np.abs(avg[:2])))


def so_reduction(model: FinslerModel, u: UPoint, t_range=(0.0, 5.0), step: float = 1e-4) -> ReductionData:
    t_max = max(abs(t_range[0]), abs(t_range[1]))
    half_width = 1.5 * t_max + 1.0
    red = _Reducer(model, u, half_width, step)
    fn = red.center

    def tau(t):
        return red.tau(fn, t)

    def F1(t):
        return 0.5 * (fn.f1(t) + fn.f1(tau(t)))

    return ReductionData(u, tau, F1, red.lam, red.horizontality(0.0), fn)


def reduction_alphas(model: FinslerModel, u: UPoint, t: float, half_width: float = 4.0, step: float = 1e-4):
    """(alpha1, alpha2, alpha0) from finite differences of the potentials."""
    return _Reducer(model, u, half_width, step).alphas(t)
